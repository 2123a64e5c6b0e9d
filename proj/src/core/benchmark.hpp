#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/eval.hpp"
#include "core/settings.hpp"
#include "core/tracker.hpp"

namespace subpeak {

struct Variant {
    std::string name;
    TrackerConfig tracker;
};

// The eight BRT/PRP/MF toggles of the ablation table, baseline first:
// none, B, P, M, BP, BM, PM, BPM.
std::vector<Variant> ablation_grid(const TrackerConfig& base);

// Per-frame outcome of tracking one sequence under the reset protocol.
struct SequenceRun {
    VotOutcome vot;
    std::vector<int> subpeaks;  // 0 on frames that were not stepped
    std::vector<TrackDiagnostics> diagnostics;
};

SequenceRun track_with_resets(const TrackerConfig& cfg, const std::vector<std::vector<FeatureMap>>& frames,
                              std::span<const Box> gt);

// Plain run without resets: init on frame 0, step every later frame.
struct PlainRun {
    std::vector<TrackDiagnostics> diagnostics;  // frames 1..N-1
};

PlainRun track_plain(const TrackerConfig& cfg, const std::vector<std::vector<FeatureMap>>& frames, const Box& init_box,
                     const std::function<void(int frame, const Grid2D& fused)>& on_response = {});

struct SequenceStats {
    std::uint64_t seed = 0;
    int failures = 0;
    int frames = 0;
    double mean_subpeaks = 0.0;
    double single_peak_fraction = 0.0;
    double mean_center_error = 0.0;
};

struct VariantSummary {
    Variant variant;
    EvalResult pooled;     // over every evaluated frame of every sequence
    int total_failures = 0;
    int better = 0;        // sequences with fewer failures than the first variant
    int worse = 0;
    double sign_p = 1.0;
    std::vector<SequenceStats> sequences;
};

struct AblationReport {
    std::vector<VariantSummary> variants;
    std::vector<std::uint64_t> seeds;
};

// Runs every variant on the same seeded sequences (seeds base_seed,
// base_seed + 1, ...). Sequences are distributed over `jobs` threads; results
// are gathered in seed order so the report does not depend on `jobs`.
AblationReport compare_configs(const RunConfig& cfg, const std::vector<Variant>& variants, int jobs = 1);

std::string report_csv(const AblationReport& report);
std::string sequences_csv(const AblationReport& report);

std::string diagnostics_csv(const std::vector<TrackDiagnostics>& diags);
std::string diagnostics_csv_header();
std::string diagnostics_csv_row(const TrackDiagnostics& d);

std::vector<std::vector<FeatureMap>> render_all(const Sequence& seq);

}  // namespace subpeak
