#ifndef LGRN_AUTOGRAD_HPP
#define LGRN_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <unordered_map>

#include "lgrn/tensor.hpp"

namespace lgrn {

struct Node;
using Var = std::shared_ptr<Node>;

// One value in the computation graph. grad has the same shape as value and
// is accumulated during the reverse sweep.
struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> parents;
    // Reads this->grad, adds into parents' grads.
    std::function<void(Node&)> backfn;

    explicit Node(Tensor v) : value(std::move(v)), grad(value.shape()) {}
};

// Learnable parameter. Lives outside any tape; gradients from one or more
// tapes are accumulated into grad by Tape::backward (or manually).
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor momentum;

    Param() = default;
    Param(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)),
          grad(value.shape()), momentum(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
};

// Records nodes in creation order; backward() runs the reverse sweep and
// then flushes gradients of every parameter used on this tape.
class Tape {
public:
    Var constant(Tensor v) { return record(std::move(v), {}, nullptr); }

    Var input(Tensor v) { return record(std::move(v), {}, nullptr); }

    // Same Param used twice on one tape yields the same Var, so gradient
    // contributions from both uses accumulate on the node.
    Var use(Param& p) {
        auto it = param_vars_.find(&p);
        if (it != param_vars_.end()) return it->second;
        Var v = record(p.value, {}, nullptr);
        param_vars_.emplace(&p, v);
        return v;
    }

    Var record(Tensor v, std::vector<Var> parents, std::function<void(Node&)> backfn) {
        auto n = std::make_shared<Node>(std::move(v));
        n->parents = std::move(parents);
        n->backfn = std::move(backfn);
        nodes_.push_back(n);
        return n;
    }

    // out must be a scalar (numel 1) on this tape. With flush_params false the
    // parameter gradients stay on the tape (read them via param_uses() /
    // flush_param_grads); used to keep multi-threaded batch accumulation in a
    // fixed, deterministic order.
    void backward(const Var& out, bool flush_params = true) {
        if (out->value.numel() != 1)
            throw Error("shape_mismatch", "backward target must be scalar");
        out->grad.fill(0.0);
        out->grad[0] = 1.0;
        // Reverse creation order is a valid topological order.
        bool seen_out = false;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (it->get() == out.get()) seen_out = true;
            if (!seen_out) continue;
            Node& n = **it;
            if (n.backfn) n.backfn(n);
        }
        if (flush_params) flush_param_grads();
    }

    void flush_param_grads() {
        for (auto& [p, var] : param_vars_) {
            double* g = p->grad.data();
            const double* s = var->grad.data();
            for (long i = 0; i < var->grad.numel(); ++i) g[i] += s[i];
        }
    }

    const std::unordered_map<Param*, Var>& param_uses() const { return param_vars_; }
    size_t size() const { return nodes_.size(); }

private:
    std::vector<Var> nodes_;
    std::unordered_map<Param*, Var> param_vars_;
};

} // namespace lgrn

#endif
