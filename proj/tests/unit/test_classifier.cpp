#include "doctest.h"

#include <cmath>

#include "core/classifier.hpp"
#include "core/errors.hpp"
#include "linear_oracle.hpp"
#include "oracles.hpp"

using namespace subpeak;

namespace {

ObjectiveOptions plain()
{
    return {};
}

double sq_norm(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return s;
}

}  // namespace

TEST_CASE("predict examples")
{
    Rng rng(1);
    const auto x = oracle::random_features(rng, 3, 6, 5);
    ClassifierWeights zero = ClassifierWeights::random(3, 2, 3, 3, 1);
    std::fill(zero.w1.weights.begin(), zero.w1.weights.end(), 0.0);
    std::fill(zero.w2.weights.begin(), zero.w2.weights.end(), 0.0);
    const auto fz = predict(zero, x);
    for (float v : fz.values()) {
        CHECK(v == 0.0f);
    }

    ClassifierWeights sum;
    sum.w1 = ConvKernel(1, 3, 1, 1, {1.0, 1.0, 1.0});
    sum.w2 = ConvKernel(1, 1, 1, 1, {1.0});
    const auto pos = oracle::random_features(rng, 3, 4, 4, 0.0, 1.0);
    const auto f = predict(sum, pos);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double want = static_cast<double>(pos.channel(0)[i]) + pos.channel(1)[i] + pos.channel(2)[i];
        CHECK(f[i] == static_cast<float>(want));
    }

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto w = ClassifierWeights::random(4, 3, 3, 3, seed);
        const auto xs = oracle::random_features(rng, 4, 7, 7);
        const auto got = predict(w, xs);
        const auto want = oracle::predict(w, xs).f;
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-6));
        }
    }
    CHECK_THROWS_AS(predict(sum, x.channels() == 3 ? oracle::random_features(rng, 2, 4, 4) : x), DimensionError);
}

TEST_CASE("loss examples")
{
    Rng rng(2);
    auto w = ClassifierWeights::random(2, 2, 3, 3, 4);
    SampleMemory mem(5, 0.2);
    CHECK_THROWS_AS(loss(w, mem, plain()), StateError);

    mem.insert({oracle::random_features(rng, 2, 5, 5), make_gaussian_label(5, 5, 2, 2, 1.0), 0});
    mem.insert({oracle::random_features(rng, 2, 5, 5), make_gaussian_label(5, 5, 1, 3, 1.0), 0});

    auto zero = w;
    std::fill(zero.w1.weights.begin(), zero.w1.weights.end(), 0.0);
    std::fill(zero.w2.weights.begin(), zero.w2.weights.end(), 0.0);
    double want = 0.0;
    for (const auto& g : mem.groups()) {
        double n = 0.0;
        for (float v : g.samples[0].label.values()) {
            n += static_cast<double>(v) * v;
        }
        want += g.gamma * n;
    }
    CHECK(loss(zero, mem, plain()) == doctest::Approx(want).epsilon(1e-12));

    // Labels reproduced exactly: only the regularizers remain.
    SampleMemory fit(3, 0.1);
    const auto x = oracle::random_features(rng, 2, 5, 5);
    fit.insert({x, predict(w, x), 0});
    w.lambda1 = w.lambda2 = 0.03;
    const auto f64 = oracle::predict(w, x).f;
    double resid = 0.0;
    const auto label = predict(w, x);
    for (std::size_t i = 0; i < f64.size(); ++i) {
        resid += (f64[i] - label[i]) * (f64[i] - label[i]);
    }
    const double reg = 0.03 * (sq_norm(w.w1.weights) + sq_norm(w.w2.weights));
    CHECK(loss(w, fit, plain()) == doctest::Approx(reg + resid).epsilon(1e-12));

    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto inst = oracle::random_instance(seed, 6, 3, 2);
        ObjectiveOptions o;
        o.rectified = inst.rectified;
        o.betas = FusionWeights(inst.betas);
        CHECK(loss(inst.w, inst.mem, o) ==
              doctest::Approx(oracle::loss(inst.w, inst.mem, inst.rectified, inst.betas)).epsilon(1e-10));
    }
}

TEST_CASE("loss does not depend on the order of samples inside a group")
{
    const auto inst = oracle::random_instance(4, 6, 3, 2);
    SampleMemory swapped(5, 0.3);
    for (const auto& g : inst.mem.groups()) {
        std::vector<TrainingSample> rev(g.samples.rbegin(), g.samples.rend());
        swapped.insert_group(rev);
    }
    ObjectiveOptions o;
    o.rectified = true;
    o.betas = FusionWeights(inst.betas);
    CHECK(loss(inst.w, swapped, o) == doctest::Approx(loss(inst.w, inst.mem, o)).epsilon(1e-13));
}

TEST_CASE("gradient examples")
{
    Rng rng(3);
    auto w = ClassifierWeights::random(2, 2, 3, 3, 9);
    std::fill(w.w1.weights.begin(), w.w1.weights.end(), 0.0);
    std::fill(w.w2.weights.begin(), w.w2.weights.end(), 0.0);
    SampleMemory mem(3, 0.1);
    mem.insert({oracle::random_features(rng, 2, 5, 5), Grid2D(5, 5), 0});
    for (double g : gradient(w, mem, plain())) {
        CHECK(g == 0.0);
    }

    // Exact-fit memory: the data term is flat, only 2*lambda*w remains.
    ClassifierWeights ones;
    ones.hidden = HiddenActivation::identity;
    ones.w1 = ConvKernel(1, 2, 1, 1, {0.5, -0.25});
    ones.w2 = ConvKernel(1, 1, 1, 1, {2.0});
    ones.lambda1 = 0.05;
    ones.lambda2 = 0.02;
    SampleMemory fit(3, 0.1);
    // Dyadic inputs and weights make the float label exactly representable.
    std::vector<Grid2D> planes;
    for (int c = 0; c < 2; ++c) {
        Grid2D g(4, 4);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] = static_cast<float>((static_cast<int>(i) % 5) - 2) * 0.25f * static_cast<float>(c + 1);
        }
        planes.push_back(g);
    }
    const FeatureMap x(planes);
    fit.insert({x, predict(ones, x), 0});
    const auto grad = gradient(ones, fit, plain());
    CHECK(grad[0] == 2 * 0.05 * 0.5);
    CHECK(grad[1] == 2 * 0.05 * -0.25);
    CHECK(grad[2] == 2 * 0.02 * 2.0);
}

TEST_CASE("gradient matches central differences")
{
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const auto inst = oracle::random_instance(seed);
        const auto r = oracle::check_gradient(inst.w, inst.mem, inst.rectified, inst.betas);
        CAPTURE(seed);
        CHECK(r.checked > r.skipped);
        CHECK(r.max_rel < 1e-5);
    }
}

TEST_CASE("optimize: zero iterations returns the input")
{
    const auto inst = oracle::random_instance(2);
    OptimizerConfig cfg;
    cfg.max_outer_iters = 0;
    CHECK(optimize(inst.w, inst.mem, cfg, plain()).flatten() == inst.w.flatten());
}

TEST_CASE("optimize is deterministic and never raises the loss")
{
    const auto inst = oracle::random_instance(5);
    ObjectiveOptions o;
    o.rectified = inst.rectified;
    o.betas = FusionWeights(inst.betas);
    OptimizerConfig cfg;
    cfg.max_outer_iters = 40;
    OptimizeReport a;
    OptimizeReport b;
    const auto wa = optimize(inst.w, inst.mem, cfg, o, &a);
    const auto wb = optimize(inst.w, inst.mem, cfg, o, &b);
    CHECK(wa.flatten() == wb.flatten());
    CHECK(a.loss_history == b.loss_history);
    for (std::size_t i = 1; i < a.loss_history.size(); ++i) {
        CHECK(a.loss_history[i] <= a.loss_history[i - 1]);
    }
    CHECK(a.loss_history.back() < a.loss_history.front());

    cfg.variant = CgVariant::fletcher_reeves;
    OptimizeReport fr;
    optimize(inst.w, inst.mem, cfg, o, &fr);
    CHECK(fr.loss_history.back() < fr.loss_history.front());
}

namespace {

double exact_fit_ratio(const ClassifierWeights& target, const ClassifierWeights& start)
{
    Rng rng(7);
    SampleMemory mem(3, 0.1);
    for (int k = 0; k < 2; ++k) {
        const auto x = oracle::random_features(rng, 2, 6, 6);
        mem.insert({x, predict(target, x), 0});
    }
    OptimizerConfig cfg;
    cfg.max_outer_iters = 200;
    cfg.grad_tolerance = 1e-12;
    OptimizeReport rep;
    optimize(start, mem, cfg, plain(), &rep);
    return rep.loss_history.back() / rep.loss_history.front();
}

}  // namespace

TEST_CASE("optimize fits an exactly representable memory")
{
    SUBCASE("identity hidden layer, random starts")
    {
        for (std::uint64_t seed = 77; seed < 87; seed += 2) {
            auto target = ClassifierWeights::random(2, 1, 3, 1, seed);
            auto start = ClassifierWeights::random(2, 1, 3, 1, seed + 1);
            target.hidden = start.hidden = HiddenActivation::identity;
            start.lambda1 = start.lambda2 = 0.0;
            CAPTURE(seed);
            CHECK(exact_fit_ratio(target, start) < 1e-6);
        }
    }
    SUBCASE("leaky hidden layer, perturbed target start")
    {
        // Leaky starts whose output sign opposes the target can stall on a kink,
        // so the leaky case checks convergence from a neighbourhood.
        for (std::uint64_t seed = 77; seed < 87; seed += 2) {
            const auto target = ClassifierWeights::random(2, 1, 3, 1, seed);
            auto start = target;
            start.lambda1 = start.lambda2 = 0.0;
            Rng rng(seed);
            for (auto* k : {&start.w1, &start.w2}) {
                for (double& v : k->weights) {
                    v += 0.05 * rng.uniform(-1.0, 1.0);
                }
            }
            CAPTURE(seed);
            CHECK(exact_fit_ratio(target, start) < 1e-6);
        }
    }
}

TEST_CASE("optimize reaches the normal-equations optimum in the linear configuration")
{
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto p = oracle::linear_problem(seed);
        OptimizerConfig cfg;
        cfg.max_outer_iters = 200;
        cfg.grad_tolerance = 1e-10;
        OptimizeReport rep;
        optimize(p.start, p.memory, cfg, plain(), &rep);
        CAPTURE(seed);
        CHECK(rep.loss_history.back() <= p.optimum * 1.01);
        CHECK(rep.loss_history.back() >= p.optimum * (1.0 - 1e-6));
    }
}

TEST_CASE("sample memory weights")
{
    Rng rng(4);
    auto sample = [&] {
        return TrainingSample{oracle::random_features(rng, 1, 3, 3), make_gaussian_label(3, 3, 1, 1, 1.0), 0};
    };
    SampleMemory mem(5, 0.1);
    mem.insert(sample());
    REQUIRE(mem.size() == 1);
    CHECK(mem.gamma(0) == 1.0);
    mem.insert(sample());
    CHECK(mem.gamma(0) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(mem.gamma(1) == doctest::Approx(0.1).epsilon(1e-15));

    SampleMemory one(1, 0.1);
    const auto first = sample();
    const auto second = sample();
    one.insert(first);
    one.insert(second);
    REQUIRE(one.size() == 1);
    CHECK(one.gamma(0) == 1.0);
    CHECK(one.group(0).samples[0].features == second.features);

    for (int k = 0; k < 12; ++k) {
        mem.insert(sample());
        CHECK(static_cast<int>(mem.size()) <= mem.capacity());
        double total = 0.0;
        for (const auto& g : mem.groups()) {
            total += g.gamma;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
    }

    CHECK_THROWS_AS(SampleMemory(0, 0.1), ParameterError);
    CHECK_THROWS_AS(SampleMemory(3, 1.0), ParameterError);
    CHECK_THROWS_AS(mem.insert({oracle::random_features(rng, 1, 3, 3), Grid2D(4, 3), 0}), DimensionError);
    CHECK_THROWS_AS(mem.insert({oracle::random_features(rng, 2, 3, 3), Grid2D(3, 3), 0}), DimensionError);
}
