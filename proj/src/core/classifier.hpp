#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "core/grid.hpp"
#include "core/peak_ops.hpp"

namespace subpeak {

enum class HiddenActivation { leaky_relu, identity };

inline constexpr double kLeakySlope = 0.05;

// Two-layer response predictor f(x) = w2 * phi(w1 * x); the output activation
// is the identity.
struct ClassifierWeights {
    ConvKernel w1;
    ConvKernel w2;
    double lambda1 = 1e-2;
    double lambda2 = 1e-2;
    HiddenActivation hidden = HiddenActivation::leaky_relu;

    std::size_t parameter_count() const { return w1.weights.size() + w2.weights.size(); }
    std::vector<double> flatten() const;
    void assign(std::span<const double> params);
    void validate() const;

    // Seeded init, N(0, 1/fan_in) per layer.
    static ClassifierWeights random(int in_channels, int mid_channels, int k1, int k2, std::uint64_t seed);
};

struct TrainingSample {
    FeatureMap features;
    Grid2D label;
    int source = 0;  // index into the fusion weights
};

// Ring of training groups. A group is the set of samples taken from one frame
// (one per active feature scale) and shares a single weight gamma; the
// gammas always sum to one.
class SampleMemory {
public:
    struct Group {
        std::vector<TrainingSample> samples;
        double gamma = 0.0;
    };

    SampleMemory(int capacity = 30, double decay = 0.1);

    int capacity() const { return capacity_; }
    double decay() const { return decay_; }
    std::size_t size() const { return groups_.size(); }
    bool empty() const { return groups_.empty(); }
    const Group& group(std::size_t j) const { return groups_.at(j); }
    double gamma(std::size_t j) const { return groups_.at(j).gamma; }
    const std::deque<Group>& groups() const { return groups_; }

    void insert(TrainingSample s);
    void insert_group(std::vector<TrainingSample> samples);
    void clear() { groups_.clear(); }

private:
    void check_consistent(const TrainingSample& s) const;

    int capacity_;
    double decay_;
    std::deque<Group> groups_;
};

SampleMemory insert_sample(SampleMemory mem, TrainingSample s);

struct ObjectiveOptions {
    bool rectified = false;
    FusionWeights betas = FusionWeights::uniform(1);
};

Grid2D predict(const ClassifierWeights& w, const FeatureMap& x);

double loss(const ClassifierWeights& w, const SampleMemory& mem, const ObjectiveOptions& opts);

// Same layout as ClassifierWeights::flatten().
std::vector<double> gradient(const ClassifierWeights& w, const SampleMemory& mem, const ObjectiveOptions& opts);

// Loss and gradient from one forward/backward sweep.
double loss_and_gradient(const ClassifierWeights& w, const SampleMemory& mem, const ObjectiveOptions& opts,
                         std::span<double> grad);

enum class CgVariant { polak_ribiere_plus, fletcher_reeves };

struct OptimizerConfig {
    int max_outer_iters = 60;
    CgVariant variant = CgVariant::polak_ribiere_plus;
    double initial_step = 1.0;
    double shrink = 0.5;
    double sufficient_decrease = 1e-4;
    double curvature = 0.1;  // strong Wolfe constant, must exceed sufficient_decrease
    int max_backtracks = 30;
    double grad_tolerance = 1e-6;

    void validate() const;
};

struct OptimizeReport {
    std::vector<double> loss_history;  // loss at start and after each accepted step
    int iterations = 0;
    int restarts = 0;
    bool converged = false;
};

ClassifierWeights optimize(const ClassifierWeights& w, const SampleMemory& mem, const OptimizerConfig& cfg,
                           const ObjectiveOptions& opts, OptimizeReport* report = nullptr);

// Number of accepted optimizer steps, process-wide, that raised the loss.
// Must stay zero; tests assert on it.
std::uint64_t monotonicity_violations();

}  // namespace subpeak
