#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "core/benchmark.hpp"
#include "core/eval.hpp"
#include "core/scene.hpp"
#include "core/settings.hpp"

namespace subpeak {

// Scene directory layout: scene.cfg, gt.csv (frame,cx,cy,h,w) and one SPSF
// file per frame and scale named frame_NNNN_sK.spsf.
std::string frame_file_name(int frame, int scale);
void simulate_to_directory(const SceneConfig& cfg, const std::filesystem::path& dir);

struct SceneDirectory {
    std::vector<std::vector<FeatureMap>> frames;
    std::vector<Box> gt;
};

SceneDirectory load_scene_directory(const std::filesystem::path& dir);

std::string encode_boxes_csv(const std::vector<Box>& boxes);
std::vector<Box> decode_boxes_csv(const std::string& text);

// Inits on ground-truth frame 0 only, then steps every later frame. Writes the
// diagnostics CSV and, when heatmap_dir is non-empty, one PGM + CSV pair of
// the fused response per frame.
void track_directory(const std::filesystem::path& scene_dir, const TrackerConfig& cfg,
                     const std::filesystem::path& out_csv, const std::filesystem::path& heatmap_dir = {});

struct RunRow {
    int frame = 0;
    Box box;
    int subpeaks = 0;
};

std::vector<RunRow> decode_run_csv(const std::string& text);

// Frames missing from the run (the init frame) are left out of the averages;
// failures counts evaluated frames with zero overlap.
EvalResult evaluate_rows(const std::vector<RunRow>& run, const std::vector<Box>& gt);
std::string eval_summary_csv(const EvalResult& r);
std::string eval_curves_csv(const EvalResult& r);

struct AblationOutput {
    std::string report;
    std::string sequences;
};

AblationOutput run_ablation(const RunConfig& cfg, int jobs);

}  // namespace subpeak
