#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "core/classifier.hpp"
#include "core/grid.hpp"
#include "core/peak_ops.hpp"
#include "core/scene.hpp"

namespace subpeak {

enum class BrtDomain { features, response, both };

struct TrackerConfig {
    bool prp_on = true;
    bool brt_on = true;
    bool multiscale_on = true;
    double brt_ratio = 0.10;
    BrtDomain brt_domain = BrtDomain::features;
    // Pool the fused map instead of each scale's map.
    bool rectify_after_fusion = false;
    // Empty means uniform over the active scales.
    std::vector<double> fusion_betas;
    int update_interval = 10;
    // Label sigma = sigma_factor * min(box h, box w), in frame pixels.
    double sigma_factor = 1.0 / 16.0;
    double subpeak_threshold = 0.5;

    int mid_channels = 8;
    int kernel1 = 3;
    int kernel2 = 3;
    double lambda1 = 1e-2;
    double lambda2 = 1e-2;
    HiddenActivation hidden = HiddenActivation::leaky_relu;
    int memory_capacity = 30;
    double memory_decay = 0.1;
    std::uint64_t seed = 7;

    OptimizerConfig init_optimizer{};
    OptimizerConfig update_optimizer{.max_outer_iters = 10};

    bool brt_on_features() const { return brt_on && brt_domain != BrtDomain::response; }
    bool brt_on_response() const { return brt_on && brt_domain != BrtDomain::features; }
    void validate() const;
};

struct TrackerState {
    ClassifierWeights weights;
    SampleMemory memory;
    Cell last_peak;
    Box last_box;
    int frame_index = 0;
};

struct TrackDiagnostics {
    int frame = 0;
    Cell peak;
    float peak_value = 0.0f;
    int subpeak_count = 0;
    GridStats response_stats;
    Box box;
    std::optional<double> loss_after_update;
};

struct StepResult {
    Box box;
    TrackDiagnostics diagnostics;
    Grid2D fused;
};

// Classification-path tracking loop. The first feature map of every frame is
// the reference resolution: boxes and peaks live in its pixel coordinates.
class Tracker {
public:
    explicit Tracker(TrackerConfig cfg);

    const TrackerConfig& config() const { return cfg_; }
    const TrackerState& state() const { return state_; }
    bool initialized() const { return initialized_; }

    void init(std::span<const FeatureMap> features, const Box& box);
    StepResult step(std::span<const FeatureMap> features);

    // Fused response for the current model without advancing the state.
    Grid2D response(std::span<const FeatureMap> features) const;

private:
    std::vector<std::size_t> active_scales(std::size_t available) const;
    FusionWeights fusion_for(std::size_t active) const;
    Cell map_cell(Cell c, const FeatureMap& from, const FeatureMap& to) const;
    std::vector<TrainingSample> make_samples(std::span<const FeatureMap> prepared, std::span<const std::size_t> scales,
                                             std::span<const FeatureMap> features, const Box& center) const;
    std::vector<FeatureMap> prepare(std::span<const FeatureMap> features, std::span<const std::size_t> scales,
                                    Cell peak) const;
    Grid2D fuse(std::span<const FeatureMap> prepared, std::span<const std::size_t> scales,
                std::span<const FeatureMap> features) const;
    ObjectiveOptions objective(std::size_t active) const;

    TrackerConfig cfg_;
    TrackerState state_;
    bool initialized_ = false;
};

// Sub-pixel centre from a 3x3 parabola fit (offset clamped to half a pixel,
// skipped on the border); size carried over from prev_box.
Box peak_to_box(Cell peak, const Box& prev_box, const Grid2D& fused);

// One-axis parabola vertex offset for samples (left, centre, right).
double parabola_offset(double left, double centre, double right);

}  // namespace subpeak
