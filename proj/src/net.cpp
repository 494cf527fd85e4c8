#include "lgrn/net.hpp"

#include <cmath>

namespace lgrn {

namespace {
Tensor randn(std::vector<int> shape, double stddev, Rng& rng) {
    Tensor out(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (long i = 0; i < out.numel(); ++i) out[i] = dist(rng);
    return out;
}

std::vector<int> spatial_of(const Var& v) { return {v->value.dim(1), v->value.dim(2)}; }

Var resize_to(Tape& t, const Var& x, const Var& like) {
    return nn::resize_bilinear(t, x, like->value.dim(1), like->value.dim(2));
}
} // namespace

ConvBlock::ConvBlock(const std::string& name, int c_in, int c_out, int kernel, int stride_,
                     bool norm_, Activation act_, Rng& rng, double norm_scale)
    : stride(stride_), pad(kernel / 2), norm(norm_), act(act_) {
    double he = std::sqrt(2.0 / (static_cast<double>(c_in) * kernel * kernel));
    w = Param(name + ".w", randn({c_out, c_in, kernel, kernel}, he, rng));
    b = Param(name + ".b", Tensor({c_out}));
    if (norm) {
        gamma = Param(name + ".gamma", Tensor::full({c_out}, norm_scale));
        beta = Param(name + ".beta", Tensor({c_out}));
    }
}

Var ConvBlock::forward(Tape& t, const Var& x) {
    Var y = nn::conv2d(t, x, t.use(w), t.use(b), stride, pad, groups);
    if (norm) y = nn::channel_norm(t, y, t.use(gamma), t.use(beta));
    if (act == Activation::relu) y = nn::relu(t, y);
    return y;
}

void ConvBlock::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
    if (norm) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
}

void BackboneConfig::validate() const {
    if (num_blocks < 1) throw Error("config", "backbone needs at least one block");
    if (static_cast<int>(channels_per_block.size()) != num_blocks ||
        static_cast<int>(stride_per_block.size()) != num_blocks)
        throw Error("config", "backbone list lengths must equal num_blocks");
    int prev = 1;
    for (int s : stride_per_block) {
        if (s <= prev || s % prev != 0 || (s / prev) % 2 != 0)
            throw Error("config", "cumulative strides must grow by powers of two");
        prev = s;
    }
}

BackboneConfig default_backbone(StreamTag stream, int num_levels) {
    BackboneConfig cfg;
    cfg.num_blocks = num_levels;
    cfg.stream = stream;
    int base = stream == StreamTag::spatial ? 16 : 8;
    for (int l = 0; l < num_levels; ++l) {
        cfg.channels_per_block.push_back(base << l);
        cfg.stride_per_block.push_back(4 << l);
    }
    return cfg;
}

Backbone::Backbone(const std::string& name, const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    int c_prev = 3;
    int stride_prev = 1;
    for (int l = 0; l < cfg_.num_blocks; ++l) {
        std::vector<ConvBlock> blocks;
        int c_out = cfg_.channels_per_block[static_cast<size_t>(l)];
        int factor = cfg_.stride_per_block[static_cast<size_t>(l)] / stride_prev;
        int idx = 0;
        int c_in = c_prev;
        while (factor > 1) {
            blocks.emplace_back(name + ".l" + std::to_string(l) + ".c" + std::to_string(idx),
                                c_in, c_out, 3, 2, true, Activation::relu, rng);
            c_in = c_out;
            factor /= 2;
            ++idx;
        }
        blocks.emplace_back(name + ".l" + std::to_string(l) + ".c" + std::to_string(idx), c_in,
                            c_out, 3, 1, true, Activation::relu, rng);
        levels_.push_back(std::move(blocks));
        c_prev = c_out;
        stride_prev = cfg_.stride_per_block[static_cast<size_t>(l)];
    }
}

std::vector<Var> Backbone::extract_features(Tape& t, const Var& image) {
    int total = cfg_.stride_per_block.back();
    int h = image->value.dim(1), w = image->value.dim(2);
    if (h % total != 0 || w % total != 0)
        throw Error("indivisible_resolution",
                    "input " + std::to_string(h) + "x" + std::to_string(w) +
                        " not divisible by total stride " + std::to_string(total));
    std::vector<Var> out;
    Var x = image;
    for (auto& level : levels_) {
        for (auto& blk : level) x = blk.forward(t, x);
        out.push_back(x);
    }
    return out;
}

void Backbone::collect(std::vector<Param*>& out) {
    for (auto& level : levels_)
        for (auto& blk : level) blk.collect(out);
}

ChannelAlign::ChannelAlign(const std::string& name, const std::vector<int>& in_channels, int c0,
                           Rng& rng) {
    for (size_t l = 0; l < in_channels.size(); ++l)
        convs_.emplace_back(name + ".l" + std::to_string(l), in_channels[l], c0, 1, 1, true,
                            Activation::relu, rng);
}

std::vector<Var> ChannelAlign::forward(Tape& t, const std::vector<Var>& pyramid) {
    if (pyramid.size() != convs_.size())
        throw Error("dimension_mismatch", "channel align: level count mismatch");
    std::vector<Var> out;
    out.reserve(pyramid.size());
    for (size_t l = 0; l < pyramid.size(); ++l) out.push_back(convs_[l].forward(t, pyramid[l]));
    return out;
}

void ChannelAlign::collect(std::vector<Param*>& out) {
    for (auto& c : convs_) c.collect(out);
}

FusionUnit::FusionUnit(const std::string& name, int c0, Rng& rng)
    : conv(name + ".conv", c0, c0, 3, 1, true, Activation::relu, rng, /*norm_scale=*/0.0) {}

FusionUnit::Out FusionUnit::forward(Tape& t, const Var& f_l, const Var& f_lm1, const Var& f_t) {
    if (f_l->value.dim(0) != f_lm1->value.dim(0) || f_l->value.dim(0) != f_t->value.dim(0))
        throw Error("channel_mismatch", "fusion inputs must share channel count");
    // Triple product at the finer (l-1) resolution.
    Var a = resize_to(t, f_l, f_lm1);
    Var b = resize_to(t, f_t, f_lm1);
    Var p = nn::mul(t, nn::mul(t, a, f_lm1), b);
    Var c = conv.forward(t, p);
    Out out;
    out.f_l = nn::add(t, f_l, resize_to(t, c, f_l));
    out.f_lm1 = nn::add(t, f_lm1, c);
    out.f_t = nn::add(t, f_t, resize_to(t, c, f_t));
    return out;
}

void FusionUnit::collect(std::vector<Param*>& out) { conv.collect(out); }

Lrb::Lrb(const std::string& name, int c0, int gcn_depth, WeightingMode mode, Rng& rng)
    : gw(name + ".gw", 4, c0, gcn_depth, mode, rng) {
    double he = std::sqrt(2.0 / (4.0 * c0));
    w1x1 = Param(name + ".w1x1", randn({c0, 4 * c0, 1, 1}, he, rng));
    b1x1 = Param(name + ".b1x1", Tensor({c0}));
}

Var Lrb::forward(Tape& t, const Var& f_hi, const Var& f_lo, const Var& f_t, const Var& f_b) {
    int c0 = f_lo->value.dim(0);
    for (const Var& f : {f_hi, f_t, f_b})
        if (f->value.dim(0) != c0)
            throw Error("channel_mismatch", "LRB inputs must all have c0 channels");
    std::vector<Var> inputs = {f_hi, f_lo, f_t, f_b};
    Var r = gw.weights(t, inputs);
    std::vector<Var> weighted;
    weighted.reserve(4);
    for (int i = 0; i < 4; ++i)
        weighted.push_back(nn::scale_row(t, resize_to(t, inputs[static_cast<size_t>(i)], f_lo),
                                         r, i));
    Var cat = nn::concat_channels(t, weighted);
    return nn::conv2d(t, cat, t.use(w1x1), t.use(b1x1));
}

void Lrb::collect(std::vector<Param*>& out) {
    gw.collect(out);
    out.push_back(&w1x1);
    out.push_back(&b1x1);
}

Grm::Grm(const std::string& name, int num_levels, int c0, int gcn_depth, WeightingMode mode,
         Rng& rng)
    : gw(name + ".gw", num_levels + 1, c0, gcn_depth, mode, rng) {
    double he = std::sqrt(2.0 / (2.0 * c0));
    for (int i = 0; i < num_levels; ++i) {
        w1x1.emplace_back(name + ".g" + std::to_string(i) + ".w",
                          randn({c0, 2 * c0, 1, 1}, he, rng));
        b1x1.emplace_back(name + ".g" + std::to_string(i) + ".b", Tensor({c0}));
    }
}

std::vector<Var> Grm::forward(Tape& t, const std::vector<Var>& locals, const Var& f_b) {
    if (locals.size() != w1x1.size())
        throw Error("dimension_mismatch", "GRM level count mismatch");
    int c0 = f_b->value.dim(0);
    for (const Var& f : locals)
        if (f->value.dim(0) != c0)
            throw Error("channel_mismatch", "GRM inputs must all have c0 channels");
    std::vector<Var> nodes = locals;
    nodes.push_back(f_b);
    Var r = gw.weights(t, nodes);
    std::vector<Var> out;
    out.reserve(locals.size());
    for (size_t i = 0; i < locals.size(); ++i) {
        Var cat = nn::concat_channels(t, {locals[i], resize_to(t, f_b, locals[i])});
        Var scaled = nn::scale_row(t, cat, r, static_cast<int>(i));
        out.push_back(nn::conv2d(t, scaled, t.use(w1x1[i]), t.use(b1x1[i])));
    }
    return out;
}

void Grm::collect(std::vector<Param*>& out) {
    gw.collect(out);
    for (auto& p : w1x1) out.push_back(&p);
    for (auto& p : b1x1) out.push_back(&p);
}

SaliencyHead::SaliencyHead(const std::string& name, int c0, Rng& rng) {
    double he = std::sqrt(2.0 / (9.0 * c0));
    w = Param(name + ".w", randn({1, c0, 3, 3}, he, rng));
    b = Param(name + ".b", Tensor({1}));
}

Var SaliencyHead::forward(Tape& t, const std::vector<Var>& globals, int out_h, int out_w) {
    if (globals.empty()) throw Error("empty_input", "saliency head: no features");
    Var acc = globals.back();
    for (int i = static_cast<int>(globals.size()) - 2; i >= 0; --i)
        acc = nn::add(t, resize_to(t, acc, globals[static_cast<size_t>(i)]),
                      globals[static_cast<size_t>(i)]);
    Var m = nn::conv2d(t, acc, t.use(w), t.use(b), 1, 1);
    m = nn::sigmoid(t, m);
    m = nn::resize_bilinear(t, m, out_h, out_w);
    return nn::reshape(t, m, {out_h, out_w});
}

void SaliencyHead::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

FeedbackEmbed::FeedbackEmbed(const std::string& name, int c0, Rng& rng) {
    double he = std::sqrt(2.0 / 9.0);
    w = Param(name + ".w", randn({c0, 1, 3, 3}, he, rng));
    b = Param(name + ".b", Tensor({c0}));
}

Var FeedbackEmbed::forward(Tape& t, const Var& map2d) {
    Var x = nn::reshape(t, map2d, {1, map2d->value.dim(0), map2d->value.dim(1)});
    return nn::conv2d(t, x, t.use(w), t.use(b), 1, 1);
}

void FeedbackEmbed::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

LgrnNet::LgrnNet(const RunConfig& cfg, Rng& rng) : cfg_(cfg) {
    int L = cfg.num_levels;
    int c0 = cfg.aligned_channels;
    spatial_ = Backbone("bbn_s", default_backbone(StreamTag::spatial, L), rng);
    temporal_ = Backbone("bbn_t", default_backbone(StreamTag::temporal, L), rng);
    align_s_ = ChannelAlign("ca_s", spatial_.config().channels_per_block, c0, rng);
    align_t_ = ChannelAlign("ca_t", temporal_.config().channels_per_block, c0, rng);
    for (int l = 1; l < L; ++l)
        fusions_.emplace_back("fuse" + std::to_string(l), c0, rng);
    if (cfg.enable_lrm && L >= 2)
        for (int l = 1; l < L; ++l)
            lrbs_.emplace_back("lrb" + std::to_string(l), c0, cfg.gcn_depth,
                               cfg.weighting_mode, rng);
    int n_locals = lrbs_.empty() ? L : L - 1;
    if (cfg.enable_grm)
        grm_ = Grm("grm", n_locals, c0, cfg.gcn_depth, cfg.weighting_mode, rng);
    head_ = SaliencyHead("head", c0, rng);
    feedback_ = FeedbackEmbed("fb", c0, rng);
}

LgrnNet::Encoded LgrnNet::encode(Tape& t, const Var& frame, const Var& flow, Profiler* prof) {
    Encoded enc;
    {
        Profiler::Scope s(prof, "backbone");
        enc.spatial = align_s_.forward(t, spatial_.extract_features(t, frame));
        enc.temporal = align_t_.forward(t, temporal_.extract_features(t, flow));
    }
    {
        Profiler::Scope s(prof, "fusion");
        // Bottom-up chain; each fusion reads the latest updated features.
        for (size_t l = 1; l < enc.spatial.size(); ++l) {
            auto out = fusions_[l - 1].forward(t, enc.spatial[l], enc.spatial[l - 1],
                                               enc.temporal[l]);
            enc.spatial[l] = out.f_l;
            enc.spatial[l - 1] = out.f_lm1;
            enc.temporal[l] = out.f_t;
        }
    }
    return enc;
}

std::vector<Var> LgrnNet::decode(Tape& t, const Encoded& fused, int out_h, int out_w,
                                 Profiler* prof) {
    int c0 = cfg_.aligned_channels;
    size_t L = fused.spatial.size();
    std::vector<Var> maps;
    for (int iter = 0; iter < cfg_.decode_iterations; ++iter) {
        Var fb;
        if (iter == 0 || !cfg_.enable_feedback) {
            auto hw = spatial_of(fused.spatial[0]);
            fb = t.constant(Tensor::zeros({c0, hw[0], hw[1]}));
        } else {
            Profiler::Scope s(prof, "head");
            fb = feedback_.forward(t, maps.back());
        }
        std::vector<Var> locals;
        if (!lrbs_.empty()) {
            Profiler::Scope s(prof, "lrm");
            for (size_t i = 0; i + 1 < L; ++i)
                locals.push_back(lrbs_[i].forward(t, fused.spatial[i + 1], fused.spatial[i],
                                                  fused.temporal[i + 1],
                                                  resize_to(t, fb, fused.spatial[i])));
        } else {
            locals = fused.spatial;
        }
        std::vector<Var> globals;
        if (cfg_.enable_grm) {
            Profiler::Scope s(prof, "grm");
            globals = grm_.forward(t, locals, resize_to(t, fb, locals[0]));
        } else {
            globals = locals;
        }
        {
            Profiler::Scope s(prof, "head");
            maps.push_back(head_.forward(t, globals, out_h, out_w));
        }
    }
    return maps;
}

std::vector<Var> LgrnNet::forward(Tape& t, const Tensor& frame, const Tensor& flow,
                                  Profiler* prof) {
    if (frame.ndim() != 3 || flow.ndim() != 3)
        throw Error("dimension_mismatch", "forward expects {3,H,W} frame and flow");
    Var fr = t.input(frame);
    Var fl = t.input(flow);
    auto enc = encode(t, fr, fl, prof);
    auto maps = decode(t, enc, frame.dim(1), frame.dim(2), prof);
    if (prof) prof->frames += 1;
    return maps;
}

std::vector<Param*> LgrnNet::params() {
    std::vector<Param*> out;
    spatial_.collect(out);
    temporal_.collect(out);
    align_s_.collect(out);
    align_t_.collect(out);
    for (auto& f : fusions_) f.collect(out);
    for (auto& l : lrbs_) l.collect(out);
    if (cfg_.enable_grm) grm_.collect(out);
    head_.collect(out);
    feedback_.collect(out);
    return out;
}

} // namespace lgrn
