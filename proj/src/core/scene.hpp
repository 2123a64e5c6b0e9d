#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/grid.hpp"

namespace subpeak {

// Axis-aligned box in frame pixel coordinates; (cx, cy) is the centre.
struct Box {
    double cx = 0.0;
    double cy = 0.0;
    double h = 0.0;
    double w = 0.0;

    friend bool operator==(const Box&, const Box&) = default;
};

enum class MotionModel { linear, sinusoidal, random_walk };

struct Occlusion {
    int start_frame = 0;
    int duration = 0;
    double coverage = 0.0;  // fraction of the target box width hidden, from its left edge

    friend bool operator==(const Occlusion&, const Occlusion&) = default;
};

struct ScaleLevel {
    std::string name;
    int factor = 1;

    friend bool operator==(const ScaleLevel&, const ScaleLevel&) = default;
};

struct ScaleSpec {
    std::vector<ScaleLevel> scales{{"shallow", 1}, {"deep", 2}};

    void validate() const;
    friend bool operator==(const ScaleSpec&, const ScaleSpec&) = default;
};

struct SceneConfig {
    int frames = 60;
    int map_h = 64;
    int map_w = 64;
    int channels = 8;
    int n_distractors = 1;
    double target_h = 12.0;
    double target_w = 12.0;
    MotionModel motion = MotionModel::linear;
    double speed = 1.0;
    double distractor_speed = 1.5;
    double distractor_similarity = 0.8;
    std::optional<Occlusion> occlusion;
    double scale_drift = 1.0;
    double noise_sigma = 0.05;
    std::uint64_t seed = 1;
    ScaleSpec scales;

    void validate() const;
    friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

struct SceneObject {
    std::vector<double> appearance;  // unit vector, one entry per channel
    std::vector<Box> track;          // per-frame box
};

struct Sequence {
    SceneConfig config;
    SceneObject target;
    std::vector<SceneObject> distractors;
    std::vector<int> crossing_frames;  // per distractor, frame of closest guaranteed approach

    int frames() const { return config.frames; }
    bool occluded(int frame) const;
};

Sequence gen_sequence(const SceneConfig& cfg);

// One feature map per scale level, each at map dims divided by the level
// factor. Bumps are placed through corner-aligned coordinates, so a coarse
// map resampled with resample_bilinear lines up with the finest one.
std::vector<FeatureMap> render_features(const Sequence& seq, int frame_idx, const ScaleSpec& scales, int channels);
std::vector<FeatureMap> render_features(const Sequence& seq, int frame_idx);

// Same frame with occlusion switched off; used for energy comparisons.
std::vector<FeatureMap> render_unoccluded(const Sequence& seq, int frame_idx);

std::vector<Box> ground_truth(const Sequence& seq);

int scaled_extent(int extent, int factor);

// Mirror an unbounded coordinate into [lo, hi] (triangle wave).
double reflect_into(double x, double lo, double hi);

}  // namespace subpeak
