#include <cmath>
#include <random>

#include "doctest.h"
#include "lmc/connectivity.hpp"
#include "oracles.hpp"

using namespace lmc;

namespace {

// 1-parameter quartic loss (w^2 - 1)^2 via a square activation:
// dense(1->1, no bias) -> square, MSE with x = 2^(1/4), y = sqrt(2)
struct Quartic {
    Network net{Shape{1, 1, 1},
                {LayerSpec::dense(1, false), LayerSpec::square()},
                LossKind::MeanSquaredError};
    DatasetSlice data = DatasetSlice::regression({std::pow(2.0, 0.25)}, 1,
                                                 {std::sqrt(2.0)}, 1);
    ParamVector at(double w) { return ParamVector(net.layout(), {w}); }
};

ParamVector pv(const Network& net, std::vector<double> v) {
    return ParamVector(net.layout(), std::move(v));
}

Network tiny_mlp3() {
    // three parameterized layers for block decompositions
    return Network(Shape{2, 1, 1},
                   {LayerSpec::dense(3), LayerSpec::tanh_act(), LayerSpec::dense(3),
                    LayerSpec::tanh_act(), LayerSpec::dense(2)},
                   LossKind::CrossEntropy);
}

}  // namespace

TEST_CASE("barrier_curve: identical endpoints give exact zeros") {
    Quartic q;
    auto curve = barrier_curve(q.net, q.at(0.3), q.at(0.3), q.data, 11);
    for (double b : curve.barrier) CHECK(b == 0.0);
}

TEST_CASE("barrier_curve: quartic toy landscape") {
    Quartic q;
    CHECK(q.net.loss(q.at(0.0), q.data) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q.net.loss(q.at(1.0), q.data) == doctest::Approx(0.0).epsilon(1e-14));

    auto curve = barrier_curve(q.net, q.at(-1.0), q.at(1.0), q.data, 25);
    CHECK(curve.barrier.front() == 0.0);
    CHECK(curve.barrier.back() == 0.0);
    auto mb = max_barrier(curve);
    CHECK(mb.alpha == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mb.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("barrier_curve: convex quadratic gives barrier -1/2 at midpoint") {
    Network net(Shape{1, 1, 1}, {LayerSpec::dense(1, false)},
                LossKind::MeanSquaredError);
    auto data = DatasetSlice::regression({1.0}, 1, {0.0}, 1);  // loss 0.5 w^2
    auto curve = barrier_curve(net, pv(net, {-1.0}), pv(net, {1.0}), data, 25);
    // midpoint is index 12 on a 25-point grid
    CHECK(curve.alphas[12] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(curve.barrier[12] == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("max_barrier: tie-break and fine-grid envelope") {
    BarrierCurve flat;
    flat.alphas = alpha_grid(5);
    flat.barrier.assign(5, 0.0);
    flat.segment_metric.assign(5, 1.0);
    auto mb = max_barrier(flat);
    CHECK(mb.alpha == 0.0);
    CHECK(mb.value == 0.0);

    Quartic q;
    auto coarse = max_barrier(barrier_curve(q.net, q.at(-1.0), q.at(1.0), q.data, 25));
    auto fine = max_barrier(barrier_curve(q.net, q.at(-1.0), q.at(1.0), q.data, 241));
    CHECK(coarse.value <= fine.value + 1e-15);
    CHECK(fine.value - coarse.value < 0.01 * std::max(1.0, fine.value));
}

TEST_CASE("predicted_barrier: identical endpoints, quartic value, symmetry") {
    Quartic q;
    auto same = predicted_barrier(q.net, q.at(0.4), q.at(0.4), q.data, 11);
    for (double p : same.predicted) CHECK(p == 0.0);

    auto pred = predicted_barrier(q.net, q.at(-1.0), q.at(1.0), q.data, 25);
    // f'' = 12 w^2 - 4 is 8 at both endpoints, delta = 2, so q1 = q2 = 32
    CHECK(pred.quad_form1 == doctest::Approx(32.0).epsilon(1e-10));
    CHECK(pred.quad_form2 == doctest::Approx(32.0).epsilon(1e-10));
    CHECK(pred.distance == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(pred.predicted.front() == 0.0);
    CHECK(pred.predicted.back() == 0.0);
    CHECK(pred.predicted[12] == doctest::Approx(4.0).epsilon(1e-10));

    // swapping endpoints reflects the curve about alpha = 1/2
    auto swapped = predicted_barrier(q.net, q.at(1.0), q.at(-1.0), q.data, 25);
    for (size_t i = 0; i < pred.alphas.size(); ++i) {
        double mirrored = swapped.predicted[pred.alphas.size() - 1 - i];
        CHECK(pred.predicted[i] == doctest::Approx(mirrored).epsilon(1e-12));
    }
}

TEST_CASE("predicted_barrier: equal curvature reduces to a(1-a)q/2, max at 1/2") {
    Quartic q;
    auto pred = predicted_barrier(q.net, q.at(-1.0), q.at(1.0), q.data, 25);
    REQUIRE(pred.quad_form1 == doctest::Approx(pred.quad_form2).epsilon(1e-10));
    double qf = pred.quad_form1;
    size_t best = 0;
    for (size_t i = 0; i < pred.alphas.size(); ++i) {
        double a = pred.alphas[i];
        CHECK(pred.predicted[i] ==
              doctest::Approx(a * (1 - a) * qf / 2.0).epsilon(1e-9));
        if (pred.predicted[i] > pred.predicted[best]) best = i;
    }
    CHECK(pred.alphas[best] == doctest::Approx(0.5));
}

TEST_CASE("predicted_barrier_simplified") {
    Quartic q;
    CHECK(predicted_barrier_simplified(q.net, q.at(0.5), q.at(0.5), q.data) == 0.0);
    CHECK(predicted_barrier_simplified(q.net, q.at(-1.0), q.at(1.0), q.data) ==
          doctest::Approx(4.0).epsilon(1e-10));
    // equals the full prediction at 1/2 when q1 == q2
    auto pred = predicted_barrier(q.net, q.at(-1.0), q.at(1.0), q.data, 25);
    CHECK(predicted_barrier_simplified(q.net, q.at(-1.0), q.at(1.0), q.data) ==
          doctest::Approx(pred.predicted[12]).epsilon(1e-12));
}

TEST_CASE("barrier swap symmetry on a random net") {
    Network net = tiny_mlp3();
    auto data = make_spiral(24, 2, 17);
    ParamVector t1 = net.init_params(1);
    ParamVector t2 = net.init_params(2);
    auto ab = barrier_curve(net, t1, t2, data, 13);
    auto ba = barrier_curve(net, t2, t1, data, 13);
    for (size_t i = 0; i < ab.alphas.size(); ++i)
        CHECK(ab.barrier[i] ==
              doctest::Approx(ba.barrier[ab.alphas.size() - 1 - i]).epsilon(1e-12));
}

TEST_CASE("layerwise_barrier_curve: degenerate cases") {
    Network net = tiny_mlp3();
    auto data = make_spiral(16, 2, 8);
    ParamVector t1 = net.init_params(3);

    SUBCASE("identical siblings") {
        auto curve = layerwise_barrier_curve(net, t1, t1, data, "fc2", 9);
        for (double b : curve.barrier) CHECK(b == 0.0);
    }
    SUBCASE("layer with zero delta") {
        // siblings differ everywhere except fc2
        ParamVector t2 = net.init_params(4);
        const auto& seg = net.layout()->segment("fc2");
        for (size_t i = seg.start; i < seg.start + seg.length; ++i) t2[i] = t1[i];
        auto curve = layerwise_barrier_curve(net, t1, t2, data, "fc2", 9);
        for (double b : curve.barrier) CHECK(b == 0.0);
    }
    SUBCASE("unknown layer") {
        CHECK_THROWS_AS(layerwise_barrier_curve(net, t1, t1, data, "nope", 9),
                        ConfigError);
    }
}

TEST_CASE("layerwise = full barrier for a single-layer network") {
    Network net(Shape{2, 1, 1}, {LayerSpec::dense(3, false)}, LossKind::CrossEntropy);
    auto data = make_spiral(18, 3, 2);
    ParamVector t1 = net.init_params(5);
    ParamVector t2 = net.init_params(6);
    auto full = barrier_curve(net, t1, t2, data, 11);
    auto layer = layerwise_barrier_curve(net, t1, t2, data, "fc1", 11);
    for (size_t i = 0; i < full.alphas.size(); ++i)
        CHECK(layer.barrier[i] == doctest::Approx(full.barrier[i]).epsilon(1e-12));

    LayerMask all(net.layout(), {"fc1"});
    auto pred = predicted_barrier(net, t1, t2, data, 11);
    for (size_t i = 0; i < pred.alphas.size(); ++i)
        CHECK(layerwise_predicted(net, t1, t2, data, all, pred.alphas[i]) ==
              doctest::Approx(pred.predicted[i]).epsilon(1e-12));
}

TEST_CASE("layerwise_predicted: full mask equals full prediction, empty rejected") {
    Network net = tiny_mlp3();
    auto data = make_spiral(12, 2, 9);
    ParamVector t1 = net.init_params(7);
    ParamVector t2 = net.init_params(8);
    auto names = net.layout()->layer_names();
    LayerMask all(net.layout(), {names.begin(), names.end()});
    auto pred = predicted_barrier(net, t1, t2, data, 9);
    for (size_t i = 0; i < pred.alphas.size(); ++i)
        CHECK(layerwise_predicted(net, t1, t2, data, all, pred.alphas[i]) ==
              doctest::Approx(pred.predicted[i]).epsilon(1e-12));

    LayerMask empty(net.layout(), {});
    CHECK_THROWS_AS(layerwise_predicted(net, t1, t2, data, empty, 0.5), ConfigError);
}

TEST_CASE("singleton + cross composition against dense Hessian blocks") {
    // small net so the dense FD Hessian stays cheap
    Network net(Shape{2, 1, 1},
                {LayerSpec::dense(3), LayerSpec::tanh_act(), LayerSpec::dense(2)},
                LossKind::CrossEntropy);
    auto data = make_spiral(10, 2, 4);
    ParamVector t1 = net.init_params(10);
    ParamVector t2 = net.init_params(11);
    ParamVector delta = t2 - t1;
    auto layout = net.layout();

    LayerMask m1(layout, {"fc1"});
    LayerMask m2(layout, {"fc2"});
    LayerMask both(layout, {"fc1", "fc2"});

    auto report = cross_block_matrix(net, t1, t2, data);
    double b11 = report.blocks[0][0];
    double b22 = report.blocks[1][1];
    double b12 = report.blocks[0][1];
    double b21 = report.blocks[1][0];
    CHECK(b12 == doctest::Approx(b21).epsilon(1e-9));

    // composition law: B*_{1,2 set} = B*_1 + B*_2 + 2 B*_{12}
    double bp = layerwise_predicted(net, t1, t2, data, both, 0.5);
    CHECK(bp == doctest::Approx(b11 + b22 + b12 + b21).epsilon(1e-10));

    // dense-Hessian block oracle, averaged over the two endpoints
    auto H1 = oracles::fd_dense_hessian(net, t1, data);
    auto H2 = oracles::fd_dense_hessian(net, t2, data);
    auto block = [&](const LayerMask& ma, const LayerMask& mb) {
        ParamVector da = ma.apply(delta);
        ParamVector db = mb.apply(delta);
        double acc = 0.0;
        for (size_t i = 0; i < da.size(); ++i)
            for (size_t j = 0; j < db.size(); ++j)
                acc += da[i] * 0.5 * (H1[i][j] + H2[i][j]) * db[j];
        return acc / 8.0;
    };
    CHECK(b11 == doctest::Approx(block(m1, m1)).epsilon(1e-8));
    CHECK(b22 == doctest::Approx(block(m2, m2)).epsilon(1e-8));
    CHECK(b12 == doctest::Approx(block(m1, m2)).epsilon(1e-8));
}

TEST_CASE("cross_block_matrix: block sum equals the full prediction at 1/2") {
    Network net = tiny_mlp3();
    auto data = make_spiral(14, 2, 5);
    ParamVector t1 = net.init_params(12);
    ParamVector t2 = net.init_params(13);
    auto report = cross_block_matrix(net, t1, t2, data);
    CHECK(report.block_sum ==
          doctest::Approx(report.full_predicted).epsilon(1e-8));

    SUBCASE("delta supported on one layer hits only that diagonal") {
        ParamVector t2b = t1;
        const auto& seg = net.layout()->segment("fc2");
        for (size_t i = seg.start; i < seg.start + seg.length; ++i) t2b[i] += 0.1;
        auto r = cross_block_matrix(net, t1, t2b, data);
        for (size_t l = 0; l < r.layers.size(); ++l)
            for (size_t lp = 0; lp < r.layers.size(); ++lp)
                if (!(r.layers[l] == "fc2" && r.layers[lp] == "fc2"))
                    CHECK(r.blocks[l][lp] == doctest::Approx(0.0).epsilon(1e-15));
    }
}

namespace {

ForkedRun hand_run(const LayoutPtr& layout, std::vector<double> fork_pt,
                   std::vector<std::vector<double>> traj1,
                   std::vector<std::vector<double>> traj2) {
    ForkedRun run;
    run.parent.checkpoints.emplace(0, ParamVector(layout, std::move(fork_pt)));
    run.fork.fork_epoch = 0;
    for (size_t t = 0; t < traj1.size(); ++t) {
        run.child1.checkpoints.emplace(int(t), ParamVector(layout, traj1[t]));
        run.child2.checkpoints.emplace(int(t), ParamVector(layout, traj2[t]));
    }
    return run;
}

}  // namespace

TEST_CASE("sibling_geometry") {
    auto layout = std::make_shared<LayerLayout>(
        std::vector<LayerSegment>{{"w", 0, 2}});

    SUBCASE("orthogonal solutions at the origin base") {
        auto run = hand_run(layout, {0, 0}, {{0, 0}, {1, 0}}, {{0, 0}, {0, 1}});
        auto geo = sibling_geometry(run);
        REQUIRE(geo.angle_origin_deg.has_value());
        CHECK(*geo.angle_origin_deg == doctest::Approx(90.0).epsilon(1e-12));
        // last trace entry compares the final diff with itself
        CHECK(geo.plane_cosine_trace.back().has_value());
        CHECK(*geo.plane_cosine_trace.back() == 1.0);
        // at t=0 the siblings coincide: cosine absent, distance zero
        CHECK(!geo.plane_cosine_trace.front().has_value());
        CHECK(geo.distance_trace.front() == 0.0);
    }
    SUBCASE("identical children") {
        auto run = hand_run(layout, {1, 1}, {{1, 1}, {2, 2}}, {{1, 1}, {2, 2}});
        auto geo = sibling_geometry(run);
        REQUIRE(geo.angle_origin_deg.has_value());
        CHECK(*geo.angle_origin_deg == doctest::Approx(0.0).epsilon(1e-9));
        for (const auto& c : geo.plane_cosine_trace) CHECK(!c.has_value());
        for (double d : geo.distance_trace) CHECK(d == 0.0);
    }
    SUBCASE("zero base vector reports an absent angle") {
        auto run = hand_run(layout, {0, 0}, {{0, 0}, {0, 0}}, {{0, 0}, {1, 0}});
        auto geo = sibling_geometry(run);
        CHECK(!geo.angle_origin_deg.has_value());  // solution1 sits at the origin
    }
}

TEST_CASE("PSD positivity: nonnegative quadratic forms give nonnegative curve") {
    Quartic q;
    auto pred = predicted_barrier(q.net, q.at(-1.0), q.at(1.0), q.data, 25);
    REQUIRE(pred.quad_form1 >= 0.0);
    REQUIRE(pred.quad_form2 >= 0.0);
    for (double p : pred.predicted) CHECK(p >= 0.0);
}
