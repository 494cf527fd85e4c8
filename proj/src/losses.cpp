#include "lgrn/losses.hpp"

namespace lgrn {

double bce_loss(const Tensor& s, const Tensor& gt) {
    Tape t;
    return nn::bce(t, t.input(s), gt)->value[0];
}

double iou_loss(const Tensor& s, const Tensor& gt) {
    Tape t;
    return nn::iou(t, t.input(s), gt)->value[0];
}

double focal_loss(const Tensor& s, const Tensor& gt, double alpha, double gamma) {
    Tape t;
    return nn::focal(t, t.input(s), gt, alpha, gamma)->value[0];
}

Var combined_loss(Tape& t, const std::vector<Var>& maps, const Tensor& gt,
                  const RunConfig& cfg, LossValue* breakdown) {
    if (maps.empty()) throw Error("empty_input", "combined_loss: no maps");
    std::vector<Var> per_map;
    LossValue acc;
    for (const Var& m : maps) {
        Var b = nn::bce(t, m, gt);
        acc.bce += b->value[0];
        if (cfg.loss_mode == LossMode::bce) {
            per_map.push_back(b);
            continue;
        }
        Var i = nn::iou(t, m, gt);
        Var f = nn::focal(t, m, gt, cfg.focal_alpha, cfg.focal_gamma);
        acc.iou += i->value[0];
        acc.focal += f->value[0];
        per_map.push_back(nn::add_scalars(t, {b, i, f}));
    }
    Var total = nn::scale_const(t, nn::add_scalars(t, per_map),
                                1.0 / static_cast<double>(maps.size()));
    if (breakdown) {
        double n = static_cast<double>(maps.size());
        breakdown->bce = acc.bce / n;
        breakdown->iou = acc.iou / n;
        breakdown->focal = acc.focal / n;
        breakdown->total = total->value[0];
    }
    return total;
}

LossValue combined_loss_value(const std::vector<Tensor>& maps, const Tensor& gt,
                              const RunConfig& cfg) {
    Tape t;
    std::vector<Var> vars;
    vars.reserve(maps.size());
    for (const Tensor& m : maps) vars.push_back(t.input(m));
    LossValue v;
    combined_loss(t, vars, gt, cfg, &v);
    return v;
}

} // namespace lgrn
