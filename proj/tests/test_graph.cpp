#include <doctest.h>

#include "lgrn/graph.hpp"
#include "testutil.hpp"

using namespace lgrn;
using test::random_tensor;

TEST_CASE("build_adjacency hand values") {
    Tensor v({3, 2}, {2.0, 0.0, 0.0, 5.0, -1.0, 0.0});
    FeatureGraph g = build_adjacency(v);
    g.validate();
    CHECK(g.adjacency.at(0, 0) == 1.0);
    CHECK(g.adjacency.at(0, 1) == doctest::Approx(0.5).epsilon(1e-14)); // orthogonal
    CHECK(g.adjacency.at(0, 2) == doctest::Approx(0.0).epsilon(1e-14)); // anti-parallel
    CHECK(g.adjacency.at(1, 0) == g.adjacency.at(0, 1));
    CHECK(g.degree.at(0, 0) == doctest::Approx(1.5).epsilon(1e-14));

    // identical nonzero rows -> similarity 1
    Tensor v2({2, 3}, {1.0, 2.0, 3.0, 1.0, 2.0, 3.0});
    CHECK(build_adjacency(v2).adjacency.at(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("build_adjacency rejects zero-norm rows") {
    Tensor v({2, 2}, {0.0, 0.0, 1.0, 0.0});
    try {
        build_adjacency(v);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.category == "zero_norm");
    }
}

TEST_CASE("adjacency scale invariance (1000 random attribute sets)") {
    Rng rng(101);
    std::uniform_real_distribution<double> scale_d(0.1, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 2 + static_cast<int>(rng() % 4);
        int d = 2 + static_cast<int>(rng() % 6);
        Tensor v = random_tensor({n, d}, rng, -1.0, 1.0);
        bool zero = false;
        for (int i = 0; i < n && !zero; ++i) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += v.at(i, j) * v.at(i, j);
            zero = std::sqrt(s) < 1e-12;
        }
        if (zero) continue;
        FeatureGraph g = build_adjacency(v);
        g.validate(); // symmetric, unit diagonal, entries in [0,1]
        double c = scale_d(rng);
        Tensor vc = v;
        for (long i = 0; i < vc.numel(); ++i) vc[i] *= c;
        FeatureGraph gc = build_adjacency(vc);
        for (long i = 0; i < g.adjacency.numel(); ++i)
            CHECK(std::fabs(g.adjacency[i] - gc.adjacency[i]) < 1e-12);
    }
}

namespace {
GcnParameters make_gcn(int d, int depth, Rng& rng) {
    GcnParameters p;
    for (int m = 0; m < depth; ++m)
        p.layer_weights.emplace_back("w" + std::to_string(m),
                                     test::random_tensor({d, d}, rng, -0.5, 0.5));
    int hidden = std::max(1, d / 2);
    p.head_w1 = Param("hw1", test::random_tensor({d, hidden}, rng, -0.5, 0.5));
    p.head_b1 = Param("hb1", test::random_tensor({hidden}, rng, -0.1, 0.1));
    p.head_w2 = Param("hw2", test::random_tensor({hidden, 1}, rng, -0.5, 0.5));
    p.head_b2 = Param("hb2", test::random_tensor({1}, rng, -0.1, 0.1));
    return p;
}
} // namespace

TEST_CASE("gcn_forward hand cases") {
    Rng rng(5);
    // N=1: A=[1], D=[1], W=I, one layer -> identity on nonnegative input
    GcnParameters p1;
    p1.layer_weights.emplace_back("w", Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    Tape t;
    Tensor x0({1, 2}, {0.3, 0.7});
    Var out = gcn_forward(t, t.input(x0), t.input(Tensor({1, 1}, {1.0})), p1);
    CHECK(out->value[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(out->value[1] == doctest::Approx(0.7).epsilon(1e-14));

    // N=2, all-ones A (D=2I), W=I -> each row becomes the mean of both rows
    Tensor a({2, 2}, {1.0, 1.0, 1.0, 1.0});
    Tensor x2({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Var out2 = gcn_forward(t, t.input(x2), t.input(a), p1);
    CHECK(out2->value.at(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out2->value.at(0, 1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(out2->value.at(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out2->value.at(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("gcn_forward permutation equivariance is exact") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 3 + static_cast<int>(rng() % 4);
        int d = 4;
        GcnParameters p = make_gcn(d, 2, rng);
        Tensor x = random_tensor({n, d}, rng, -1.0, 1.0);
        Tensor a({n, n});
        for (int i = 0; i < n; ++i) {
            a.at(i, i) = 1.0;
            for (int j = 0; j < i; ++j) {
                double v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                a.at(i, j) = v;
                a.at(j, i) = v;
            }
        }
        std::vector<int> perm(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        Tensor xp({n, d}), ap({n, n});
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) xp.at(i, j) = x.at(perm[static_cast<size_t>(i)], j);
            for (int j = 0; j < n; ++j)
                ap.at(i, j) = a.at(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
        }
        Tape t;
        Var y = gcn_forward(t, t.input(x), t.input(a), p);
        Var yp = gcn_forward(t, t.input(xp), t.input(ap), p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
                CHECK(yp->value.at(i, j) == y->value.at(perm[static_cast<size_t>(i)], j));
    }
}

TEST_CASE("weight head: zero parameters give exactly 0.5, outputs stay in (0,1)") {
    Rng rng(11);
    GcnParameters p = make_gcn(4, 1, rng);
    p.head_w1.value.fill(0.0);
    p.head_b1.value.fill(0.0);
    p.head_w2.value.fill(0.0);
    p.head_b2.value.fill(0.0);
    Tape t;
    Tensor x = random_tensor({3, 4}, rng, -2.0, 2.0);
    Var r = weight_head(t, t.input(x), p);
    REQUIRE(r->value.shape() == std::vector<int>{3, 1});
    for (long i = 0; i < 3; ++i) CHECK(r->value[i] == 0.5);

    GcnParameters p2 = make_gcn(4, 1, rng);
    Var r2 = weight_head(t, t.input(x), p2);
    for (long i = 0; i < 3; ++i) {
        CHECK(r2->value[i] > 0.0);
        CHECK(r2->value[i] < 1.0);
    }
    // identical rows get identical weights
    Tensor xx({2, 4}, {1.0, -0.5, 2.0, 0.25, 1.0, -0.5, 2.0, 0.25});
    Var rr = weight_head(t, t.input(xx), p2);
    CHECK(rr->value[0] == rr->value[1]);
}

TEST_CASE("graph weighter: node attributes of constant maps and 2x2 hand value") {
    Rng rng(13);
    GraphWeighter gw("gw", 2, 1, 2, WeightingMode::gcn, rng);
    std::vector<Param*> ps;
    gw.collect(ps);
    // identity 3x3 attribute convs
    for (Param* p : ps)
        if (p->name.find(".attr") != std::string::npos && p->name.back() == 'w') {
            p->value.fill(0.0);
            p->value[4] = 1.0;
        } else if (p->name.find(".attr") != std::string::npos) {
            p->value.fill(0.0);
        }
    Tape t;
    Var attrs = gw.node_attributes(
        t, {t.input(Tensor({1, 2, 2}, {1.0, 2.0, 3.0, 4.0})), t.input(Tensor({1, 3, 3}, 7.0))});
    REQUIRE(attrs->value.shape() == std::vector<int>{2, 1});
    CHECK(attrs->value[0] == doctest::Approx(2.5).epsilon(1e-14));
    // constant map with identity conv: interior taps see 7 but the border is
    // zero-padded, so only the center-tap kernel keeps the GAP at 7
    CHECK(attrs->value[1] == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("graph weighter falls back to the uniform adjacency on zero features") {
    Rng rng(17);
    GraphWeighter gw("gw_fb", 2, 4, 2, WeightingMode::gcn, rng);
    // zero the attribute biases so an all-zero feature yields a zero attribute row
    std::vector<Param*> ps;
    gw.collect(ps);
    for (Param* p : ps)
        if (p->name.find(".attr") != std::string::npos && p->name.back() == 'b')
            p->value.fill(0.0);
    Tape t;
    long before = gw.fallback_count();
    Var r = gw.weights(t, {t.input(Tensor({4, 3, 3})), t.input(Tensor({4, 3, 3}, 0.5))});
    CHECK(gw.fallback_count() == before + 1);
    CHECK(r->value.all_finite());
}

TEST_CASE("graph weighter modes: none is all-ones, forced weights are honoured") {
    Rng rng(19);
    GraphWeighter gw("gw_none", 3, 2, 1, WeightingMode::none, rng);
    Tape t;
    std::vector<Var> feats = {t.input(Tensor({2, 2, 2}, 0.2)), t.input(Tensor({2, 2, 2}, 0.4)),
                              t.input(Tensor({2, 2, 2}, 0.6))};
    Var r = gw.weights(t, feats);
    for (long i = 0; i < 3; ++i) CHECK(r->value[i] == 1.0);

    GraphWeighter gw2("gw_forced", 3, 2, 1, WeightingMode::gcn, rng);
    gw2.forced_weights = std::vector<double>{0.1, 0.2, 0.3};
    Var r2 = gw2.weights(t, feats);
    CHECK(r2->value[0] == 0.1);
    CHECK(r2->value[2] == 0.3);
}

TEST_CASE("end-to-end graph weighting gradient check") {
    Rng rng(23);
    GraphWeighter gw("gw_grad", 2, 3, 2, WeightingMode::gcn, rng);
    std::vector<Param*> params;
    gw.collect(params);
    Tensor fa = random_tensor({3, 3, 3}, rng, 0.2, 1.0);
    Tensor fb = random_tensor({3, 2, 2}, rng, 0.2, 1.0);
    auto forward = [&]() {
        Tape t;
        Var r = gw.weights(t, {t.input(fa), t.input(fb)});
        return r->value[0] * r->value[0] + 2.0 * r->value[1];
    };
    auto run_backward = [&]() {
        Tape t;
        Var r = gw.weights(t, {t.input(fa), t.input(fb)});
        Var loss = t.record(Tensor({1}, {r->value[0] * r->value[0] + 2.0 * r->value[1]}), {r},
                            [](Node& n) {
                                Var p = n.parents[0];
                                p->grad[0] += n.grad[0] * 2.0 * p->value[0];
                                p->grad[1] += n.grad[0] * 2.0;
                            });
        t.backward(loss);
    };
    CHECK(test::gradcheck_params(forward, params, run_backward) < 1e-4);
}
