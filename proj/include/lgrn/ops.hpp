#ifndef LGRN_OPS_HPP
#define LGRN_OPS_HPP

#include "lgrn/autograd.hpp"

namespace lgrn::nn {

Var relu(Tape& t, const Var& x);
Var sigmoid(Tape& t, const Var& x);
Var add(Tape& t, const Var& a, const Var& b);
Var mul(Tape& t, const Var& a, const Var& b);
Var scale_const(Tape& t, const Var& x, double c);
// r is {N,1}; multiplies x elementwise by the scalar r(row,0).
Var scale_row(Tape& t, const Var& x, const Var& r, int row);
Var reshape(Tape& t, const Var& x, std::vector<int> shape);

// x {C,H,W}, w {Co,Ci/groups,k,k}, b {Co}; zero padding.
Var conv2d(Tape& t, const Var& x, const Var& w, const Var& b,
           int stride = 1, int pad = 0, int groups = 1);

// Per-channel normalization over spatial positions with learnable affine.
Var channel_norm(Tape& t, const Var& x, const Var& gamma, const Var& beta,
                 double eps = 1e-5);

Var resize_bilinear(Tape& t, const Var& x, int out_h, int out_w);
Var concat_channels(Tape& t, const std::vector<Var>& xs);
Var global_avg_pool(Tape& t, const Var& x); // {C,H,W} -> {C}
Var stack_rows(Tape& t, const std::vector<Var>& rows); // N x {C} -> {N,C}

Var matmul(Tape& t, const Var& a, const Var& b);
// out[i][k] = canonical_sum_j a[i][j]*x[j][k]; bit-stable under node permutation.
Var matmul_canonical(Tape& t, const Var& a, const Var& x);
Var add_rowvec(Tape& t, const Var& x, const Var& b);

// A_ij = (cos(v_i, v_j)+1)/2 off-diagonal, A_ii = 1. If any attribute row has
// (near-)zero norm the uniform-adjacency fallback (all ones, no gradient) is
// returned and *used_fallback is set.
Var cosine_adjacency(Tape& t, const Var& v, bool* used_fallback = nullptr);
// Ahat = D^-1/2 A D^-1/2 with D from canonical row sums.
Var normalize_adjacency(Tape& t, const Var& a);

// Losses; S is {H,W} on-tape, gt is a plain {H,W} tensor. Mean reduction,
// log arguments clamped to [eps, 1-eps].
Var bce(Tape& t, const Var& s, const Tensor& gt);
Var iou(Tape& t, const Var& s, const Tensor& gt);
Var focal(Tape& t, const Var& s, const Tensor& gt, double alpha, double gamma);

Var add_scalars(Tape& t, const std::vector<Var>& xs);

constexpr double kLogClamp = 1e-7;

} // namespace lgrn::nn

#endif
