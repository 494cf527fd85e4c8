#ifndef LGRN_LOSSES_HPP
#define LGRN_LOSSES_HPP

#include "lgrn/config.hpp"
#include "lgrn/ops.hpp"

namespace lgrn {

struct LossValue {
    double total = 0.0;
    double bce = 0.0;
    double iou = 0.0;
    double focal = 0.0;
};

// Plain-value entry points (mean reduction).
double bce_loss(const Tensor& s, const Tensor& gt);
double iou_loss(const Tensor& s, const Tensor& gt);
double focal_loss(const Tensor& s, const Tensor& gt, double alpha, double gamma);

// Equal-weight mean over all supervised maps; loss_mode bce uses only the
// BCE component. breakdown, if given, receives the per-component means.
Var combined_loss(Tape& t, const std::vector<Var>& maps, const Tensor& gt,
                  const RunConfig& cfg, LossValue* breakdown = nullptr);

LossValue combined_loss_value(const std::vector<Tensor>& maps, const Tensor& gt,
                              const RunConfig& cfg);

} // namespace lgrn

#endif
