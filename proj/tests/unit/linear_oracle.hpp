#pragma once

// Dense solution of the identity-activation problem with a 3x3 first layer and
// a 1x1 second layer on one hidden channel. The network output is s * (u * x)
// so only the product v = s*u matters for the data term, and the cheapest
// split of v between the two regularizers costs 2*sqrt(l1*l2)*|v|. The
// optimum of |Av - y|^2 + 2*mu*|v| solves (A'A + (mu/t) I) v = A'y with
// |v| = t, found by bisection on t.

#include <Eigen/Dense>

#include <cmath>

#include "core/classifier.hpp"
#include "oracles.hpp"

namespace oracle {

struct LinearProblem {
    subpeak::ClassifierWeights start;
    subpeak::SampleMemory memory{1, 0.5};
    double optimum = 0.0;
};

inline LinearProblem linear_problem(std::uint64_t seed, int size = 6, int channels = 2)
{
    subpeak::Rng rng(seed);
    LinearProblem p;
    p.start = subpeak::ClassifierWeights::random(channels, 1, 3, 1, seed + 100);
    p.start.hidden = subpeak::HiddenActivation::identity;
    p.start.lambda1 = 1e-2;
    p.start.lambda2 = 1e-2;
    const auto x = random_features(rng, channels, size, size);
    const auto y = subpeak::make_gaussian_label(size, size, rng.uniform(1, size - 2), rng.uniform(1, size - 2), 1.0);
    p.memory.insert({x, y, 0});

    const int n = channels * 9;
    const int m = size * size;
    Eigen::MatrixXd a(m, n);
    subpeak::ConvKernel unit(1, channels, 3, 3);
    const auto xs = planes(x);
    for (int k = 0; k < n; ++k) {
        std::fill(unit.weights.begin(), unit.weights.end(), 0.0);
        unit.weights[static_cast<std::size_t>(k)] = 1.0;
        const auto col = conv(xs, channels, size, size, unit);
        for (int i = 0; i < m; ++i) {
            a(i, k) = col[static_cast<std::size_t>(i)];
        }
    }
    Eigen::VectorXd yv(m);
    for (int i = 0; i < m; ++i) {
        yv(i) = y[static_cast<std::size_t>(i)];
    }
    const double mu = std::sqrt(p.start.lambda1 * p.start.lambda2);
    const Eigen::MatrixXd ata = a.transpose() * a;
    const Eigen::VectorXd aty = a.transpose() * yv;
    auto solve = [&](double t) -> Eigen::VectorXd {
        return (ata + (mu / t) * Eigen::MatrixXd::Identity(n, n)).ldlt().solve(aty);
    };
    auto objective = [&](const Eigen::VectorXd& v) { return (a * v - yv).squaredNorm() + 2.0 * mu * v.norm(); };

    double best = yv.squaredNorm();  // v = 0
    if (aty.norm() > mu) {
        double lo = 1e-12;
        double hi = 1.0;
        while (solve(hi).norm() > hi) {
            hi *= 2.0;
        }
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (solve(mid).norm() > mid ? lo : hi) = mid;
        }
        best = std::min(best, objective(solve(0.5 * (lo + hi))));
    }
    p.optimum = best;
    return p;
}

}  // namespace oracle
