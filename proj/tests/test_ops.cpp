#include <doctest.h>

#include "lgrn/ops.hpp"
#include "testutil.hpp"

using namespace lgrn;
using test::gradcheck;
using test::random_tensor;

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.at(1, 2) == 6.0);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1.0}), Error);
    CHECK_THROWS_AS(Tensor({0, 3}), Error);
    CHECK(t.all_finite());
    t[0] = std::nan("");
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("canonical_sum is permutation independent") {
    Rng rng(7);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> terms(64);
    for (auto& v : terms) v = d(rng) * std::pow(10.0, d(rng) * 8);
    double ref = canonical_sum(terms);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(terms.begin(), terms.end(), rng);
        CHECK(canonical_sum(terms) == ref); // bit-equal by construction
    }
}

namespace {

// Scalar objective: sum of squares of the op output, so every output entry
// participates in the gradient.
double sumsq_value(const Tensor& v) {
    double s = 0.0;
    for (long i = 0; i < v.numel(); ++i) s += v[i] * v[i];
    return s;
}

Var sumsq(Tape& t, const Var& x) {
    return t.record(Tensor({1}, {sumsq_value(x->value)}), {x}, [](Node& n) {
        Var p = n.parents[0];
        for (long i = 0; i < p->value.numel(); ++i)
            p->grad[i] += n.grad[0] * 2.0 * p->value[i];
    });
}

double check_unary(const std::function<Var(Tape&, const Var&)>& op, const Tensor& x) {
    auto f = [&](const Tensor& xt) {
        Tape t;
        return sumsq_value(op(t, t.input(xt))->value);
    };
    Tape t;
    Var xv = t.input(x);
    Var loss = sumsq(t, op(t, xv));
    t.backward(loss);
    return gradcheck(f, x, xv->grad);
}

} // namespace

TEST_CASE("elementwise op gradients") {
    Rng rng(11);
    Tensor x = random_tensor({2, 3, 3}, rng, -1.0, 1.0);
    CHECK(check_unary([](Tape& t, const Var& v) { return nn::sigmoid(t, v); }, x) < 1e-4);
    CHECK(check_unary([](Tape& t, const Var& v) { return nn::scale_const(t, v, -2.5); }, x) <
          1e-4);
    // ReLU has a kink at 0; keep the input away from it.
    Tensor xr = random_tensor({2, 3, 3}, rng, 0.1, 1.0);
    for (long i = 0; i < xr.numel(); ++i)
        if (i % 2) xr[i] = -xr[i];
    CHECK(check_unary([](Tape& t, const Var& v) { return nn::relu(t, v); }, xr) < 1e-4);
}

TEST_CASE("add/mul gradients") {
    Rng rng(13);
    Tensor a = random_tensor({2, 2, 2}, rng, -1.0, 1.0);
    Tensor b = random_tensor({2, 2, 2}, rng, -1.0, 1.0);
    auto f = [&](const Tensor& at) {
        Tape t;
        return sumsq_value(nn::mul(t, nn::add(t, t.input(at), t.input(b)), t.input(at))->value);
    };
    Tape t;
    Var av = t.input(a);
    Var loss = sumsq(t, nn::mul(t, nn::add(t, av, t.input(b)), av));
    t.backward(loss);
    CHECK(gradcheck(f, a, av->grad) < 1e-4);
}

TEST_CASE("conv2d forward: identity kernel and hand value") {
    Tape t;
    Tensor x({1, 2, 2}, {1, 2, 3, 4});
    Tensor w({1, 1, 3, 3});
    w[4] = 1.0; // center tap
    Var y = nn::conv2d(t, t.input(x), t.input(w), t.input(Tensor({1})), 1, 1);
    for (long i = 0; i < 4; ++i) CHECK(y->value[i] == doctest::Approx(x[i]).epsilon(1e-14));

    // 3x3 box filter over the same input with zero padding.
    Tensor wbox({1, 1, 3, 3}, std::vector<double>(9, 1.0));
    Var z = nn::conv2d(t, t.input(x), t.input(wbox), t.input(Tensor({1})), 1, 1);
    CHECK(z->value[0] == doctest::Approx(1 + 2 + 3 + 4));
}

TEST_CASE("conv2d gradient (stride, padding, groups)") {
    Rng rng(17);
    Tensor x = random_tensor({4, 5, 5}, rng, -1.0, 1.0);
    Tensor w = random_tensor({2, 4, 3, 3}, rng, -0.5, 0.5);
    Tensor b = random_tensor({2}, rng, -0.5, 0.5);
    auto run = [&](const Tensor& xt, const Tensor& wt, const Tensor& bt) {
        Tape t;
        return nn::conv2d(t, t.input(xt), t.input(wt), t.input(bt), 2, 1);
    };
    Tape t;
    Var xv = t.input(x), wv = t.input(w), bv = t.input(b);
    Var loss = sumsq(t, nn::conv2d(t, xv, wv, bv, 2, 1));
    t.backward(loss);
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::conv2d(tt, tt.input(v), tt.input(w), tt.input(b), 2, 1)->value); }, x, xv->grad) < 1e-4);
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::conv2d(tt, tt.input(x), tt.input(v), tt.input(b), 2, 1)->value); }, w, wv->grad) < 1e-4);
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::conv2d(tt, tt.input(x), tt.input(w), tt.input(v), 2, 1)->value); }, b, bv->grad) < 1e-4);

    // depthwise
    Tensor wd = random_tensor({4, 1, 3, 3}, rng, -0.5, 0.5);
    Tensor bd = random_tensor({4}, rng, -0.5, 0.5);
    Tape t2;
    Var xv2 = t2.input(x), wv2 = t2.input(wd);
    Var loss2 = sumsq(t2, nn::conv2d(t2, xv2, wv2, t2.input(bd), 1, 1, 4));
    t2.backward(loss2);
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::conv2d(tt, tt.input(v), tt.input(wd), tt.input(bd), 1, 1, 4)->value); }, x, xv2->grad) < 1e-4);
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::conv2d(tt, tt.input(x), tt.input(v), tt.input(bd), 1, 1, 4)->value); }, wd, wv2->grad) < 1e-4);
}

TEST_CASE("channel_norm normalizes and differentiates") {
    Rng rng(19);
    Tensor x = random_tensor({3, 4, 4}, rng, -2.0, 2.0);
    Tensor g = random_tensor({3}, rng, 0.5, 1.5);
    Tensor be = random_tensor({3}, rng, -0.5, 0.5);
    Tape t;
    Var y = nn::channel_norm(t, t.input(x), t.input(g), t.input(be));
    // Per-channel mean ~ beta, std ~ |gamma| (up to eps).
    for (int c = 0; c < 3; ++c) {
        double m = 0.0;
        for (int i = 0; i < 16; ++i) m += y->value[c * 16 + i];
        m /= 16.0;
        CHECK(m == doctest::Approx(be[c]).epsilon(1e-9));
    }
    Tape t2;
    Var xv = t2.input(x), gv = t2.input(g), bv = t2.input(be);
    Var loss = sumsq(t2, nn::channel_norm(t2, xv, gv, bv));
    t2.backward(loss);
    auto fx = [&](const Tensor& v) { Tape tt; return sumsq_value(nn::channel_norm(tt, tt.input(v), tt.input(g), tt.input(be))->value); };
    auto fg = [&](const Tensor& v) { Tape tt; return sumsq_value(nn::channel_norm(tt, tt.input(x), tt.input(v), tt.input(be))->value); };
    auto fb = [&](const Tensor& v) { Tape tt; return sumsq_value(nn::channel_norm(tt, tt.input(x), tt.input(g), tt.input(v))->value); };
    // a slightly larger step keeps finite-difference noise below the bound
    CHECK(gradcheck(fx, x, xv->grad, 1e-5) < 1e-4);
    CHECK(gradcheck(fg, g, gv->grad) < 1e-4);
    CHECK(gradcheck(fb, be, bv->grad) < 1e-4);
}

TEST_CASE("resize_bilinear endpoints and gradient") {
    Tape t;
    Tensor x({1, 2, 2}, {0.0, 1.0, 2.0, 3.0});
    Var same = nn::resize_bilinear(t, t.input(x), 2, 2);
    for (long i = 0; i < 4; ++i) CHECK(same->value[i] == x[i]);
    Var up = nn::resize_bilinear(t, t.input(x), 4, 4);
    CHECK(up->value.dim(1) == 4);
    // Upsampled corners replicate the source corners (align_corners=false clamps).
    CHECK(up->value.at(0, 0, 0) == doctest::Approx(0.0));
    CHECK(up->value.at(0, 3, 3) == doctest::Approx(3.0));

    Rng rng(23);
    Tensor xr = random_tensor({2, 3, 3}, rng, -1.0, 1.0);
    Tape t2;
    Var xv = t2.input(xr);
    Var loss = sumsq(t2, nn::resize_bilinear(t2, xv, 5, 7));
    t2.backward(loss);
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::resize_bilinear(tt, tt.input(v), 5, 7)->value); }, xr, xv->grad) < 1e-4);
}

TEST_CASE("concat, GAP, stack, scale_row gradients") {
    Rng rng(29);
    Tensor a = random_tensor({2, 2, 2}, rng, -1.0, 1.0);
    Tensor b = random_tensor({3, 2, 2}, rng, -1.0, 1.0);
    Tape t;
    Var av = t.input(a);
    Var cat = nn::concat_channels(t, {av, t.input(b)});
    CHECK(cat->value.dim(0) == 5);
    Var loss = sumsq(t, cat);
    t.backward(loss);
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::concat_channels(tt, {tt.input(v), tt.input(b)})->value); }, a, av->grad) < 1e-4);

    Tape t2;
    Var xv = t2.input(a);
    Var gap = nn::global_avg_pool(t2, xv);
    CHECK(gap->value.dim(0) == 2);
    CHECK(gap->value[0] == doctest::Approx((a[0] + a[1] + a[2] + a[3]) / 4.0));
    t2.backward(sumsq(t2, gap));
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::global_avg_pool(tt, tt.input(v))->value); }, a, xv->grad) < 1e-4);

    // scale_row: row 1 of r scales x.
    Tensor r({3, 1}, {0.5, -2.0, 1.5});
    Tape t3;
    Var xv3 = t3.input(a), rv = t3.input(r);
    Var y = nn::scale_row(t3, xv3, rv, 1);
    for (long i = 0; i < a.numel(); ++i) CHECK(y->value[i] == doctest::Approx(-2.0 * a[i]));
    t3.backward(sumsq(t3, y));
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::scale_row(tt, tt.input(v), tt.input(r), 1)->value); }, a, xv3->grad) < 1e-4);
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::scale_row(tt, tt.input(a), tt.input(v), 1)->value); }, r, rv->grad) < 1e-4);
}

TEST_CASE("matmul family gradients and canonical equivalence") {
    Rng rng(31);
    Tensor a = random_tensor({3, 4}, rng, -1.0, 1.0);
    Tensor b = random_tensor({4, 2}, rng, -1.0, 1.0);
    Tape t;
    Var av = t.input(a), bv = t.input(b);
    Var y = nn::matmul(t, av, bv);
    t.backward(sumsq(t, y));
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::matmul(tt, tt.input(v), tt.input(b))->value); }, a, av->grad) < 1e-4);
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::matmul(tt, tt.input(a), tt.input(v))->value); }, b, bv->grad) < 1e-4);

    // matmul_canonical is specialized for square (adjacency) left operands.
    Tensor sq = random_tensor({4, 4}, rng, -1.0, 1.0);
    Tape t2;
    Var ym = nn::matmul(t2, t2.input(sq), t2.input(b));
    Var yc = nn::matmul_canonical(t2, t2.input(sq), t2.input(b));
    for (long i = 0; i < ym->value.numel(); ++i)
        CHECK(yc->value[i] == doctest::Approx(ym->value[i]).epsilon(1e-13));

    Tensor x = random_tensor({2, 3}, rng, -1.0, 1.0);
    Tensor bias = random_tensor({3}, rng, -1.0, 1.0);
    Tape t3;
    Var xv = t3.input(x), biasv = t3.input(bias);
    t3.backward(sumsq(t3, nn::add_rowvec(t3, xv, biasv)));
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::add_rowvec(tt, tt.input(x), tt.input(v))->value); }, bias, biasv->grad) < 1e-4);
}

TEST_CASE("adjacency ops: values, fallback, gradients") {
    Tape t;
    Tensor v({3, 2}, {1.0, 0.0,   // e1
                      0.0, 2.0,   // orthogonal to e1
                      -3.0, 0.0}); // anti-parallel to e1
    Var a = nn::cosine_adjacency(t, t.input(v));
    CHECK(a->value.at(0, 0) == 1.0);
    CHECK(a->value.at(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(a->value.at(0, 2) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(a->value.at(1, 2) == doctest::Approx(0.5).epsilon(1e-14));

    bool fell = false;
    Tensor vz({2, 2}, {0.0, 0.0, 1.0, 1.0});
    Var af = nn::cosine_adjacency(t, t.input(vz), &fell);
    CHECK(fell);
    for (long i = 0; i < 4; ++i) CHECK(af->value[i] == 1.0);

    Rng rng(37);
    Tensor vr = test::random_tensor({4, 3}, rng, 0.2, 1.0);
    Tape t2;
    Var vv = t2.input(vr);
    Var loss = [&] {
        Var adj = nn::cosine_adjacency(t2, vv);
        Var nrm = nn::normalize_adjacency(t2, adj);
        return sumsq(t2, nrm);
    }();
    t2.backward(loss);
    auto f = [&](const Tensor& vt) {
        Tape tt;
        return sumsq_value(
            nn::normalize_adjacency(tt, nn::cosine_adjacency(tt, tt.input(vt)))->value);
    };
    CHECK(gradcheck(f, vr, vv->grad) < 1e-4);
}

TEST_CASE("reshape keeps data and routes gradient") {
    Rng rng(41);
    Tensor x = random_tensor({1, 2, 3}, rng);
    Tape t;
    Var xv = t.input(x);
    Var y = nn::reshape(t, xv, {2, 3});
    for (long i = 0; i < 6; ++i) CHECK(y->value[i] == x[i]);
    t.backward(sumsq(t, y));
    CHECK(gradcheck([&](const Tensor& v) { Tape tt; return sumsq_value(nn::reshape(tt, tt.input(v), {2, 3})->value); }, x, xv->grad) < 1e-4);
}
