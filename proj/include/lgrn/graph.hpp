#ifndef LGRN_GRAPH_HPP
#define LGRN_GRAPH_HPP

#include <atomic>
#include <optional>

#include "lgrn/config.hpp"
#include "lgrn/ops.hpp"

namespace lgrn {

// Node attributes plus the cosine-similarity graph built from them.
struct FeatureGraph {
    Tensor node_attributes; // {N,d}
    Tensor adjacency;       // {N,N}, symmetric, unit diagonal, entries in [0,1]
    Tensor degree;          // {N,N} diagonal

    void validate() const;
};

// A_ij = (cos(v_i,v_j)+1)/2 off-diagonal, A_ii = 1. Throws zero_norm if any
// attribute row has zero norm (callers substitute the uniform fallback).
FeatureGraph build_adjacency(const Tensor& v);

struct GcnParameters {
    std::vector<Param> layer_weights; // {d,d} each
    Param head_w1, head_b1;           // d -> d/2
    Param head_w2, head_b2;           // d/2 -> 1

    void collect(std::vector<Param*>& out);
};

// X^(m) = sigma(D^-1/2 A D^-1/2 X^(m-1) W^(m)); ReLU on hidden layers,
// identity on the last. WeightingMode::fc drops the graph aggregation.
Var gcn_forward(Tape& t, const Var& x0, const Var& adjacency, GcnParameters& params,
                WeightingMode mode = WeightingMode::gcn);

// Two fully-connected layers with ReLU between and sigmoid at the end;
// one weight per node, strictly inside (0,1).
Var weight_head(Tape& t, const Var& xm, GcnParameters& params);

// Per-feature adaptive weighting shared by the local and global refinement
// units: depthwise 3x3 attribute convolutions + GAP, cosine graph, GCN (or FC)
// propagation, sigmoid head.
class GraphWeighter {
public:
    GraphWeighter() = default;
    GraphWeighter(const std::string& name, int num_nodes, int channels, int gcn_depth,
                  WeightingMode mode, Rng& rng);

    // features.size() must equal num_nodes; spatial sizes may differ.
    Var weights(Tape& t, const std::vector<Var>& features);

    Var node_attributes(Tape& t, const std::vector<Var>& features);

    void collect(std::vector<Param*>& out);

    // Test/ablation hook: bypasses the learned head with fixed weights.
    std::optional<std::vector<double>> forced_weights;

    WeightingMode mode = WeightingMode::gcn;
    long fallback_count() const { return fallbacks_ ? fallbacks_->load() : 0; }

private:
    int num_nodes_ = 0;
    int channels_ = 0;
    std::vector<Param> attr_w_, attr_b_; // per node, depthwise 3x3
    GcnParameters gcn_;
    std::shared_ptr<std::atomic<long>> fallbacks_;
    std::string name_;
};

} // namespace lgrn

#endif
