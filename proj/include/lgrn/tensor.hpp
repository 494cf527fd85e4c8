#ifndef LGRN_TENSOR_HPP
#define LGRN_TENSOR_HPP

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lgrn {

// Error with a machine-parsable category; the CLI prints "error category=<c> msg=<m>".
struct Error : std::runtime_error {
    std::string category;
    Error(std::string cat, const std::string& msg)
        : std::runtime_error(msg), category(std::move(cat)) {}
};

// Dense row-major tensor of doubles. Shapes used in practice:
// {C,H,W} feature maps, {H,W} masks/maps, {N,D} matrices, {K} vectors.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(numel_of(shape_), fill) {}
    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<size_t>(numel_of(shape_)) != data_.size())
            throw Error("shape_mismatch", "tensor data size does not match shape");
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double v) { return Tensor(std::move(shape), v); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    long numel() const { return static_cast<long>(data_.size()); }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
    double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

    // 2D access
    double& at(int i, int j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    double at(int i, int j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    // 3D access (c, y, x)
    double& at(int c, int y, int x) {
        return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
    }
    double at(int c, int y, int x) const {
        return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static long numel_of(const std::vector<int>& shape) {
        long n = 1;
        for (int d : shape) {
            if (d <= 0) throw Error("shape_mismatch", "non-positive tensor dimension");
            n *= d;
        }
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// Deterministic RNG used everywhere seeding matters.
using Rng = std::mt19937_64;

// Summation whose result depends only on the multiset of terms, not their
// order. Used in graph aggregation so node permutations commute bit-exactly.
double canonical_sum(std::vector<double> terms);

} // namespace lgrn

#endif
