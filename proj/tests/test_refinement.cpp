#include <doctest.h>

#include "lgrn/losses.hpp"
#include "lgrn/net.hpp"
#include "testutil.hpp"

using namespace lgrn;
using test::random_tensor;

TEST_CASE("LRB with unit weights and averaging conv equals the mean of inputs") {
    Rng rng(31);
    int c0 = 2;
    Lrb lrb("lrb", c0, 1, WeightingMode::gcn, rng);
    lrb.gw.forced_weights = std::vector<double>{1.0, 1.0, 1.0, 1.0};
    // 1x1 conv frozen to channel-wise averaging of the four groups
    lrb.w1x1.value.fill(0.0);
    for (int oc = 0; oc < c0; ++oc)
        for (int k = 0; k < 4; ++k) lrb.w1x1.value[oc * 4 * c0 + k * c0 + oc] = 0.25;
    lrb.b1x1.value.fill(0.0);
    Tape t;
    // all four inputs already at the finer resolution so no resampling blurs them
    Tensor a = random_tensor({c0, 4, 4}, rng), b = random_tensor({c0, 4, 4}, rng);
    Tensor c = random_tensor({c0, 4, 4}, rng), d = random_tensor({c0, 4, 4}, rng);
    Var out = lrb.forward(t, t.input(a), t.input(b), t.input(c), t.input(d));
    for (long i = 0; i < a.numel(); ++i)
        CHECK(out->value[i] == doctest::Approx((a[i] + b[i] + c[i] + d[i]) / 4.0).epsilon(1e-13));
}

TEST_CASE("LRB with r_b = 0 ignores the feedback content") {
    Rng rng(37);
    Lrb lrb("lrb", 3, 1, WeightingMode::gcn, rng);
    lrb.gw.forced_weights = std::vector<double>{0.7, 0.4, 0.9, 0.0};
    Tape t;
    Tensor a = random_tensor({3, 2, 2}, rng), b = random_tensor({3, 4, 4}, rng);
    Tensor c = random_tensor({3, 2, 2}, rng);
    Var out1 = lrb.forward(t, t.input(a), t.input(b), t.input(c),
                           t.input(random_tensor({3, 4, 4}, rng)));
    Var out2 = lrb.forward(t, t.input(a), t.input(b), t.input(c),
                           t.input(random_tensor({3, 4, 4}, rng, -5.0, 5.0)));
    for (long i = 0; i < out1->value.numel(); ++i) CHECK(out1->value[i] == out2->value[i]);
}

TEST_CASE("LRB shape contract: output at the finer level") {
    Rng rng(41);
    Lrb lrb("lrb", 32, 2, WeightingMode::gcn, rng);
    Tape t;
    Var out = lrb.forward(t, t.input(random_tensor({32, 8, 8}, rng, 0.1, 1.0)),
                          t.input(random_tensor({32, 16, 16}, rng, 0.1, 1.0)),
                          t.input(random_tensor({32, 8, 8}, rng, 0.1, 1.0)),
                          t.input(random_tensor({32, 16, 16}, rng, 0.1, 1.0)));
    CHECK(out->value.shape() == std::vector<int>{32, 16, 16});
    CHECK_THROWS_AS(lrb.forward(t, t.input(Tensor({16, 8, 8}, 0.1)),
                                t.input(Tensor({32, 16, 16}, 0.1)),
                                t.input(Tensor({32, 8, 8}, 0.1)),
                                t.input(Tensor({32, 16, 16}, 0.1))),
                    Error);
}

TEST_CASE("GRM shape contract and zero-weight annihilation") {
    Rng rng(43);
    int c0 = 4;
    Grm grm("grm", 3, c0, 1, WeightingMode::gcn, rng);
    Tape t;
    std::vector<Var> locals = {t.input(random_tensor({c0, 16, 16}, rng, 0.1, 1.0)),
                               t.input(random_tensor({c0, 8, 8}, rng, 0.1, 1.0)),
                               t.input(random_tensor({c0, 4, 4}, rng, 0.1, 1.0))};
    Var fb = t.input(random_tensor({c0, 16, 16}, rng, 0.1, 1.0));
    auto out = grm.forward(t, locals, fb);
    REQUIRE(out.size() == 3);
    CHECK(out[0]->value.shape() == std::vector<int>{c0, 16, 16});
    CHECK(out[1]->value.shape() == std::vector<int>{c0, 8, 8});
    CHECK(out[2]->value.shape() == std::vector<int>{c0, 4, 4});

    grm.gw.forced_weights = std::vector<double>{0.0, 0.5, 0.5, 0.5};
    for (auto& b : grm.b1x1) b.value.fill(0.0);
    auto out2 = grm.forward(t, locals, fb);
    for (long i = 0; i < out2[0]->value.numel(); ++i) CHECK(out2[0]->value[i] == 0.0);
}

TEST_CASE("saliency head: range, resolution, zero-input midpoint") {
    Rng rng(47);
    SaliencyHead head("head", 3, rng);
    Tape t;
    std::vector<Var> globals = {t.input(random_tensor({3, 8, 8}, rng, -1.0, 1.0)),
                                t.input(random_tensor({3, 4, 4}, rng, -1.0, 1.0))};
    Var m = head.forward(t, globals, 32, 32);
    CHECK(m->value.shape() == std::vector<int>{32, 32});
    for (long i = 0; i < m->value.numel(); ++i) {
        CHECK(m->value[i] >= 0.0);
        CHECK(m->value[i] <= 1.0);
    }
    head.b.value.fill(0.0);
    Var z = head.forward(t, {t.input(Tensor({3, 4, 4}))}, 8, 8);
    for (long i = 0; i < z->value.numel(); ++i) CHECK(z->value[i] == 0.5);
}

namespace {
RunConfig tiny_cfg() {
    RunConfig cfg;
    cfg.num_levels = 2;
    cfg.aligned_channels = 4;
    cfg.gcn_depth = 1;
    cfg.decode_iterations = 2;
    cfg.input_size = 16;
    return cfg;
}
} // namespace

TEST_CASE("decode: map count, range, resolution") {
    RunConfig cfg = tiny_cfg();
    Rng rng(53);
    LgrnNet net(cfg, rng);
    Tape t;
    auto maps = net.forward(t, Tensor({3, 16, 16}, 0.4), Tensor({3, 16, 16}, 0.5));
    REQUIRE(maps.size() == 2);
    for (const Var& m : maps) {
        CHECK(m->value.shape() == std::vector<int>{16, 16});
        for (long i = 0; i < m->value.numel(); ++i) {
            CHECK(m->value[i] >= 0.0);
            CHECK(m->value[i] <= 1.0);
        }
    }
}

TEST_CASE("decode: T=1 emits exactly one map, bit-identical to iteration 1 of T=2") {
    RunConfig cfg = tiny_cfg();
    Rng rng(59);
    LgrnNet net(cfg, rng);
    Tensor frame = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
    Tensor flow = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
    Tape t;
    auto maps2 = net.forward(t, frame, flow);

    RunConfig cfg1 = cfg;
    cfg1.decode_iterations = 1;
    Rng rng2(59);
    LgrnNet net1(cfg1, rng2);
    Tape t1;
    auto maps1 = net1.forward(t1, frame, flow);
    REQUIRE(maps1.size() == 1);
    for (long i = 0; i < maps1[0]->value.numel(); ++i)
        CHECK(maps1[0]->value[i] == maps2[0]->value[i]);
}

TEST_CASE("decode without feedback repeats the same map exactly") {
    RunConfig cfg = tiny_cfg();
    cfg.enable_feedback = false;
    cfg.decode_iterations = 3;
    Rng rng(61);
    LgrnNet net(cfg, rng);
    Tape t;
    auto maps = net.forward(t, Tensor({3, 16, 16}, 0.3), Tensor({3, 16, 16}, 0.6));
    REQUIRE(maps.size() == 3);
    for (size_t m = 1; m < maps.size(); ++m)
        for (long i = 0; i < maps[0]->value.numel(); ++i)
            CHECK(maps[m]->value[i] == maps[0]->value[i]);
}

TEST_CASE("ablation switches change the wiring but keep the contract") {
    Rng rng(67);
    Tensor frame = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
    Tensor flow = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
    for (auto wm : {WeightingMode::gcn, WeightingMode::fc, WeightingMode::none}) {
        for (bool lrm : {true, false})
            for (bool grm : {true, false}) {
                RunConfig cfg = tiny_cfg();
                cfg.weighting_mode = wm;
                cfg.enable_lrm = lrm;
                cfg.enable_grm = grm;
                Rng r2(71);
                LgrnNet net(cfg, r2);
                Tape t;
                auto maps = net.forward(t, frame, flow);
                CHECK(maps.size() == 2);
                CHECK(maps.back()->value.shape() == std::vector<int>{16, 16});
                CHECK(maps.back()->value.all_finite());
            }
    }
}

TEST_CASE("end-to-end decode gradient check on a 1-level 4x4 miniature") {
    RunConfig cfg;
    cfg.num_levels = 1;
    cfg.aligned_channels = 2;
    cfg.gcn_depth = 1;
    cfg.decode_iterations = 2;
    cfg.input_size = 4;
    Rng rng(73);
    LgrnNet net(cfg, rng);
    Tensor frame = random_tensor({3, 4, 4}, rng, 0.1, 0.9);
    Tensor flow = random_tensor({3, 4, 4}, rng, 0.1, 0.9);
    Tensor gt({4, 4});
    gt.at(1, 1) = 1.0;
    gt.at(1, 2) = 1.0;
    std::vector<Param*> params = net.params();
    // Jitter every parameter: zero-initialized biases would otherwise leave
    // ReLU inputs sitting exactly on the kink, where finite differences and
    // subgradients legitimately disagree.
    std::uniform_real_distribution<double> jitter(0.05, 0.2);
    for (Param* p : params)
        for (long i = 0; i < p->value.numel(); ++i)
            p->value[i] += jitter(rng) * (rng() & 1 ? 1.0 : -1.0);
    auto forward = [&]() {
        Tape t;
        auto maps = net.forward(t, frame, flow);
        return combined_loss(t, maps, gt, cfg)->value[0];
    };
    auto run_backward = [&]() {
        Tape t;
        auto maps = net.forward(t, frame, flow);
        t.backward(combined_loss(t, maps, gt, cfg));
    };
    CHECK(test::gradcheck_params(forward, params, run_backward, 1e-5, 1e-3) < 1e-3);
}
