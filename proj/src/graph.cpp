#include "lgrn/graph.hpp"

#include <cmath>
#include <iostream>

namespace lgrn {

void FeatureGraph::validate() const {
    const Tensor& a = adjacency;
    if (a.ndim() != 2 || a.dim(0) != a.dim(1))
        throw Error("shape_mismatch", "adjacency must be square");
    int n = a.dim(0);
    for (int i = 0; i < n; ++i) {
        if (a.at(i, i) != 1.0)
            throw Error("shape_mismatch", "adjacency diagonal must be 1");
        double deg = 0.0;
        for (int j = 0; j < n; ++j) {
            if (a.at(i, j) < 0.0 || a.at(i, j) > 1.0)
                throw Error("shape_mismatch", "adjacency entry outside [0,1]");
            if (a.at(i, j) != a.at(j, i))
                throw Error("shape_mismatch", "adjacency not symmetric");
            deg += a.at(i, j);
        }
        if (deg <= 0.0) throw Error("zero_norm", "non-positive node degree");
        if (degree.at(i, i) <= 0.0)
            throw Error("zero_norm", "degree matrix has non-positive diagonal");
    }
}

FeatureGraph build_adjacency(const Tensor& v) {
    if (v.ndim() != 2) throw Error("shape_mismatch", "attributes must be {N,d}");
    int n = v.dim(0), d = v.dim(1);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += v.at(i, j) * v.at(i, j);
        if (std::sqrt(s) < 1e-12)
            throw Error("zero_norm", "attribute row " + std::to_string(i) + " has zero norm");
    }
    Tape tape;
    Var a = nn::cosine_adjacency(tape, tape.input(v));
    FeatureGraph g;
    g.node_attributes = v;
    g.adjacency = a->value;
    g.degree = Tensor({n, n});
    std::vector<double> row(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) row[static_cast<size_t>(j)] = g.adjacency.at(i, j);
        g.degree.at(i, i) = canonical_sum(row);
    }
    return g;
}

void GcnParameters::collect(std::vector<Param*>& out) {
    for (auto& w : layer_weights) out.push_back(&w);
    out.push_back(&head_w1);
    out.push_back(&head_b1);
    out.push_back(&head_w2);
    out.push_back(&head_b2);
}

Var gcn_forward(Tape& t, const Var& x0, const Var& adjacency, GcnParameters& params,
                WeightingMode mode) {
    Var x = x0;
    Var ahat;
    if (mode == WeightingMode::gcn) ahat = nn::normalize_adjacency(t, adjacency);
    int m_total = static_cast<int>(params.layer_weights.size());
    for (int m = 0; m < m_total; ++m) {
        if (mode == WeightingMode::gcn) x = nn::matmul_canonical(t, ahat, x);
        x = nn::matmul(t, x, t.use(params.layer_weights[static_cast<size_t>(m)]));
        if (m + 1 < m_total) x = nn::relu(t, x);
    }
    return x;
}

Var weight_head(Tape& t, const Var& xm, GcnParameters& params) {
    Var h = nn::add_rowvec(t, nn::matmul(t, xm, t.use(params.head_w1)), t.use(params.head_b1));
    h = nn::relu(t, h);
    h = nn::add_rowvec(t, nn::matmul(t, h, t.use(params.head_w2)), t.use(params.head_b2));
    return nn::sigmoid(t, h);
}

namespace {
Tensor randn(std::vector<int> shape, double stddev, Rng& rng) {
    Tensor out(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (long i = 0; i < out.numel(); ++i) out[i] = dist(rng);
    return out;
}
} // namespace

GraphWeighter::GraphWeighter(const std::string& name, int num_nodes, int channels,
                             int gcn_depth, WeightingMode m, Rng& rng)
    : mode(m), num_nodes_(num_nodes), channels_(channels),
      fallbacks_(std::make_shared<std::atomic<long>>(0)), name_(name) {
    for (int i = 0; i < num_nodes; ++i) {
        attr_w_.emplace_back(name + ".attr" + std::to_string(i) + ".w",
                             randn({channels, 1, 3, 3}, std::sqrt(2.0 / 9.0), rng));
        attr_b_.emplace_back(name + ".attr" + std::to_string(i) + ".b", Tensor({channels}));
    }
    int hidden = std::max(1, channels / 2);
    for (int m2 = 0; m2 < gcn_depth; ++m2)
        gcn_.layer_weights.emplace_back(name + ".gcn" + std::to_string(m2) + ".w",
                                        randn({channels, channels},
                                              std::sqrt(1.0 / channels), rng));
    gcn_.head_w1 = Param(name + ".head.w1",
                         randn({channels, hidden}, std::sqrt(1.0 / channels), rng));
    gcn_.head_b1 = Param(name + ".head.b1", Tensor({hidden}));
    gcn_.head_w2 = Param(name + ".head.w2", randn({hidden, 1}, std::sqrt(1.0 / hidden), rng));
    gcn_.head_b2 = Param(name + ".head.b2", Tensor({1}));
}

Var GraphWeighter::node_attributes(Tape& t, const std::vector<Var>& features) {
    if (features.empty()) throw Error("empty_input", "node_attributes: no features");
    std::vector<Var> rows;
    rows.reserve(features.size());
    for (size_t i = 0; i < features.size(); ++i) {
        Var c = nn::conv2d(t, features[i], t.use(attr_w_[i]), t.use(attr_b_[i]),
                           /*stride=*/1, /*pad=*/1, /*groups=*/channels_);
        rows.push_back(nn::global_avg_pool(t, c));
    }
    return nn::stack_rows(t, rows);
}

Var GraphWeighter::weights(Tape& t, const std::vector<Var>& features) {
    int n = static_cast<int>(features.size());
    if (n != num_nodes_ && num_nodes_ != 0 && !forced_weights && mode != WeightingMode::none)
        throw Error("dimension_mismatch", "GraphWeighter: unexpected node count");
    if (forced_weights) {
        Tensor r({n, 1});
        for (int i = 0; i < n; ++i) r.at(i, 0) = (*forced_weights)[static_cast<size_t>(i)];
        return t.constant(std::move(r));
    }
    if (mode == WeightingMode::none)
        return t.constant(Tensor::full({n, 1}, 1.0));

    Var v = node_attributes(t, features);
    Var a;
    if (mode == WeightingMode::gcn) {
        bool fellback = false;
        a = nn::cosine_adjacency(t, v, &fellback);
        if (fellback && fallbacks_ && fallbacks_->fetch_add(1) == 0)
            std::cerr << "event=uniform_adjacency_fallback unit=" << name_ << "\n";
    }
    Var xm = gcn_forward(t, v, a, gcn_, mode);
    return weight_head(t, xm, gcn_);
}

void GraphWeighter::collect(std::vector<Param*>& out) {
    for (auto& p : attr_w_) out.push_back(&p);
    for (auto& p : attr_b_) out.push_back(&p);
    gcn_.collect(out);
}

} // namespace lgrn
