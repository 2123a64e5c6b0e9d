#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "core/scene.hpp"

namespace subpeak {

inline constexpr int kPrecisionThresholds = 51;  // 0..50 px
inline constexpr int kSuccessThresholds = 101;   // 0..1 in steps of 0.01
inline constexpr int kReinitDelay = 5;

double iou(const Box& a, const Box& b);
double center_error(const Box& a, const Box& b);

struct Curves {
    std::vector<std::pair<double, double>> precision;  // (threshold px, fraction with error <= threshold)
    std::vector<std::pair<double, double>> success;    // (threshold, fraction with overlap > threshold)
    double success_auc = 0.0;                           // trapezoid over the success curve
};

Curves precision_success(std::span<const Box> pred, std::span<const Box> gt);

struct EvalResult {
    Curves curves;
    int failures = 0;
    int frames = 0;  // frames that entered the accuracy averages
    double mean_center_error = 0.0;
    double mean_subpeaks = 0.0;
    double single_peak_fraction = 0.0;
};

// Two callbacks standing in for a tracker under the reset protocol.
struct TrackerClosure {
    std::function<void(int frame, const Box& gt)> init;
    std::function<Box(int frame)> step;
};

struct VotOutcome {
    int failures = 0;
    std::vector<Box> boxes;        // prediction per frame (ground truth on init frames)
    std::vector<std::uint8_t> evaluated;  // frame was predicted by step (not an init or skipped frame)
    std::vector<int> failure_frames;
};

// Frame 0 initialises from ground truth. A frame whose predicted box has zero
// overlap with ground truth is a failure; the next kReinitDelay - 1 frames are
// skipped and the tracker is re-initialised from ground truth kReinitDelay
// frames after the failure.
VotOutcome run_vot(TrackerClosure& tracker, std::span<const Box> gt);
int vot_robustness(TrackerClosure& tracker, std::span<const Box> gt);

// Evaluates the frames flagged in `evaluated` (all frames when empty).
EvalResult evaluate_run(std::span<const Box> pred, std::span<const Box> gt, std::span<const std::uint8_t> evaluated,
                        std::span<const int> subpeaks, int failures);

// Exact two-sided sign test p-value for `better` vs `worse` paired outcomes
// (ties dropped).
double sign_test_p(int better, int worse);

bool curves_monotone(const Curves& c);

}  // namespace subpeak
