#ifndef LGRN_NET_HPP
#define LGRN_NET_HPP

#include <chrono>
#include <map>

#include "lgrn/datamodel.hpp"
#include "lgrn/graph.hpp"

namespace lgrn {

// Wall-time accumulator for the per-component runtime report.
struct Profiler {
    std::map<std::string, double> seconds;
    long frames = 0;

    struct Scope {
        Profiler* p;
        std::string key;
        std::chrono::steady_clock::time_point start;
        Scope(Profiler* prof, std::string k)
            : p(prof), key(std::move(k)), start(std::chrono::steady_clock::now()) {}
        ~Scope() {
            if (p)
                p->seconds[key] +=
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count();
        }
    };
};

enum class Activation { none, relu };

// conv -> (channel norm) -> (relu)
struct ConvBlock {
    Param w, b, gamma, beta;
    int stride = 1, pad = 0, groups = 1;
    bool norm = true;
    Activation act = Activation::relu;

    ConvBlock() = default;
    // norm_scale: initial value of the norm scale (0 => block starts as zero output).
    ConvBlock(const std::string& name, int c_in, int c_out, int kernel, int stride_,
              bool norm_, Activation act_, Rng& rng, double norm_scale = 1.0);

    Var forward(Tape& t, const Var& x);
    void collect(std::vector<Param*>& out);
};

struct BackboneConfig {
    int num_blocks = 4;
    std::vector<int> channels_per_block;
    std::vector<int> stride_per_block; // cumulative strides, e.g. {4,8,16,32}
    StreamTag stream = StreamTag::spatial;

    void validate() const;
};

// Small convolutional pyramid: per level, one stride-2 conv per factor of two
// plus one stride-1 conv, each with norm and ReLU.
class Backbone {
public:
    Backbone() = default;
    Backbone(const std::string& name, const BackboneConfig& cfg, Rng& rng);

    // image {3,H,W}; H and W must be divisible by the total stride.
    std::vector<Var> extract_features(Tape& t, const Var& image);

    const BackboneConfig& config() const { return cfg_; }
    void collect(std::vector<Param*>& out);

private:
    BackboneConfig cfg_;
    std::vector<std::vector<ConvBlock>> levels_;
};

// Per-level 1x1 conv + norm + ReLU mapping heterogeneous widths to c_0.
class ChannelAlign {
public:
    ChannelAlign() = default;
    ChannelAlign(const std::string& name, const std::vector<int>& in_channels, int c0, Rng& rng);
    std::vector<Var> forward(Tape& t, const std::vector<Var>& pyramid);
    void collect(std::vector<Param*>& out);

private:
    std::vector<ConvBlock> convs_;
};

// One adjacent-level fusion: the triple elementwise product at the finer
// resolution, a 3x3 conv correction (norm scale zero-initialized so fusion
// starts as the identity), residual addition into all three inputs.
struct FusionUnit {
    ConvBlock conv;

    FusionUnit() = default;
    FusionUnit(const std::string& name, int c0, Rng& rng);

    struct Out {
        Var f_l, f_lm1, f_t;
    };
    Out forward(Tape& t, const Var& f_l, const Var& f_lm1, const Var& f_t);
    void collect(std::vector<Param*>& out);
};

// Local refinement block over {f_s_l, f_s_l-1, f_t_l, f_b}.
struct Lrb {
    GraphWeighter gw;
    Param w1x1, b1x1; // 4*c0 -> c0

    Lrb() = default;
    Lrb(const std::string& name, int c0, int gcn_depth, WeightingMode mode, Rng& rng);

    Var forward(Tape& t, const Var& f_hi, const Var& f_lo, const Var& f_t, const Var& f_b);
    void collect(std::vector<Param*>& out);
};

// Global refinement over all local outputs plus the feedback feature.
struct Grm {
    GraphWeighter gw;
    std::vector<Param> w1x1, b1x1; // per level, 2*c0 -> c0

    Grm() = default;
    Grm(const std::string& name, int num_levels, int c0, int gcn_depth, WeightingMode mode,
        Rng& rng);

    std::vector<Var> forward(Tape& t, const std::vector<Var>& locals, const Var& f_b);
    void collect(std::vector<Param*>& out);
};

// Top-down accumulation, 3x3 conv to one channel, sigmoid, upsample to H x W.
struct SaliencyHead {
    Param w, b;

    SaliencyHead() = default;
    SaliencyHead(const std::string& name, int c0, Rng& rng);

    // globals ordered finest -> coarsest; returns {H,W}.
    Var forward(Tape& t, const std::vector<Var>& globals, int out_h, int out_w);
    void collect(std::vector<Param*>& out);
};

// Embeds a predicted map (1 channel) into a c0-channel feedback feature.
struct FeedbackEmbed {
    Param w, b;

    FeedbackEmbed() = default;
    FeedbackEmbed(const std::string& name, int c0, Rng& rng);
    Var forward(Tape& t, const Var& map2d);
    void collect(std::vector<Param*>& out);
};

// The full two-stream local-global refinement network.
class LgrnNet {
public:
    LgrnNet() = default;
    LgrnNet(const RunConfig& cfg, Rng& rng);

    // Returns the fused spatial and temporal pyramids (aligned to c0).
    struct Encoded {
        std::vector<Var> spatial;
        std::vector<Var> temporal;
    };
    Encoded encode(Tape& t, const Var& frame, const Var& flow, Profiler* prof = nullptr);

    // All decode iterations' maps, iteration order; back() is the final map.
    std::vector<Var> decode(Tape& t, const Encoded& fused, int out_h, int out_w,
                            Profiler* prof = nullptr);

    std::vector<Var> forward(Tape& t, const Tensor& frame, const Tensor& flow,
                             Profiler* prof = nullptr);

    std::vector<Param*> params();
    const RunConfig& config() const { return cfg_; }

    // Exposed for targeted tests.
    std::vector<Lrb>& lrbs() { return lrbs_; }
    Grm& grm() { return grm_; }

private:
    RunConfig cfg_;
    Backbone spatial_, temporal_;
    ChannelAlign align_s_, align_t_;
    std::vector<FusionUnit> fusions_;
    std::vector<Lrb> lrbs_;
    Grm grm_;
    SaliencyHead head_;
    FeedbackEmbed feedback_;
};

BackboneConfig default_backbone(StreamTag stream, int num_levels);

} // namespace lgrn

#endif
