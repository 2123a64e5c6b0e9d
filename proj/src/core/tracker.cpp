#include "core/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace subpeak {

void TrackerConfig::validate() const
{
    if (!(brt_ratio >= 0.0 && brt_ratio <= 1.0)) {
        throw ParameterError("brt_ratio must lie in [0, 1]");
    }
    if (update_interval < 1) {
        throw ParameterError("update_interval must be at least 1");
    }
    if (!(sigma_factor > 0.0)) {
        throw ParameterError("sigma_factor must be positive");
    }
    if (!(subpeak_threshold > 0.0 && subpeak_threshold <= 1.0)) {
        throw ParameterError("subpeak_threshold must lie in (0, 1]");
    }
    if (mid_channels < 1 || kernel1 < 1 || kernel2 < 1 || kernel1 % 2 == 0 || kernel2 % 2 == 0) {
        throw ParameterError("classifier layer sizes must be positive with odd kernels");
    }
    if (!fusion_betas.empty()) {
        FusionWeights check(fusion_betas);
        (void)check;
    }
    init_optimizer.validate();
    update_optimizer.validate();
}

double parabola_offset(double left, double centre, double right)
{
    const double denom = 2.0 * (left - 2.0 * centre + right);
    if (!(denom < 0.0)) {
        return 0.0;
    }
    return std::clamp((left - right) / denom, -0.5, 0.5);
}

Box peak_to_box(Cell peak, const Box& prev_box, const Grid2D& fused)
{
    if (!fused.contains(peak)) {
        throw ParameterError("peak lies outside the response map");
    }
    double row = peak.row;
    double col = peak.col;
    const bool interior = peak.row > 0 && peak.row + 1 < fused.height() && peak.col > 0 && peak.col + 1 < fused.width();
    if (interior) {
        row += parabola_offset(fused.at(peak.row - 1, peak.col), fused.at(peak.row, peak.col),
                               fused.at(peak.row + 1, peak.col));
        col += parabola_offset(fused.at(peak.row, peak.col - 1), fused.at(peak.row, peak.col),
                               fused.at(peak.row, peak.col + 1));
    }
    return {col, row, prev_box.h, prev_box.w};
}

Tracker::Tracker(TrackerConfig cfg)
    : cfg_(std::move(cfg)), state_{ClassifierWeights{}, SampleMemory(cfg_.memory_capacity, cfg_.memory_decay), {}, {}, 0}
{
    cfg_.validate();
}

std::vector<std::size_t> Tracker::active_scales(std::size_t available) const
{
    if (available == 0) {
        throw DimensionError("tracker needs at least one feature scale");
    }
    std::vector<std::size_t> out{0};
    if (cfg_.multiscale_on) {
        for (std::size_t s = 1; s < available; ++s) {
            out.push_back(s);
        }
    }
    return out;
}

FusionWeights Tracker::fusion_for(std::size_t active) const
{
    if (cfg_.fusion_betas.size() >= active && !cfg_.fusion_betas.empty()) {
        std::vector<double> b(cfg_.fusion_betas.begin(), cfg_.fusion_betas.begin() + static_cast<std::ptrdiff_t>(active));
        if (std::any_of(b.begin(), b.end(), [](double v) { return v > 0.0; })) {
            return FusionWeights(std::move(b));
        }
    }
    return FusionWeights::uniform(static_cast<int>(active));
}

ObjectiveOptions Tracker::objective(std::size_t active) const
{
    ObjectiveOptions opts;
    opts.rectified = cfg_.prp_on;
    opts.betas = fusion_for(active);
    return opts;
}

Cell Tracker::map_cell(Cell c, const FeatureMap& from, const FeatureMap& to) const
{
    const auto r = std::lround(corner_aligned(c.row, from.height(), to.height()));
    const auto q = std::lround(corner_aligned(c.col, from.width(), to.width()));
    return {static_cast<int>(std::clamp<long>(r, 0, to.height() - 1)), static_cast<int>(std::clamp<long>(q, 0, to.width() - 1))};
}

std::vector<FeatureMap> Tracker::prepare(std::span<const FeatureMap> features, std::span<const std::size_t> scales,
                                         Cell peak) const
{
    std::vector<FeatureMap> out;
    out.reserve(scales.size());
    for (std::size_t s : scales) {
        const FeatureMap& x = features[s];
        if (!cfg_.brt_on_features()) {
            out.push_back(x);
            continue;
        }
        const Cell local = map_cell(peak, features[0], x);
        std::vector<Grid2D> grids;
        grids.reserve(static_cast<std::size_t>(x.channels()));
        for (const auto& g : x.grids()) {
            grids.push_back(brt(g, local, cfg_.brt_ratio));
        }
        out.emplace_back(std::move(grids));
    }
    return out;
}

Grid2D Tracker::fuse(std::span<const FeatureMap> prepared, std::span<const std::size_t> scales,
                     std::span<const FeatureMap> features) const
{
    const int h0 = features[0].height();
    const int w0 = features[0].width();
    const bool per_map = cfg_.prp_on && !cfg_.rectify_after_fusion;
    std::vector<Grid2D> maps;
    maps.reserve(scales.size());
    for (std::size_t i = 0; i < scales.size(); ++i) {
        Grid2D r = predict(state_.weights, prepared[i]);
        if (per_map) {
            r = rectify(r);
        }
        maps.push_back(resample_bilinear(r, h0, w0));
    }
    Grid2D fused = fuse_responses(maps, fusion_for(scales.size()));
    if (cfg_.prp_on && cfg_.rectify_after_fusion) {
        fused = rectify(fused);
    }
    return fused;
}

std::vector<TrainingSample> Tracker::make_samples(std::span<const FeatureMap> prepared, std::span<const std::size_t> scales,
                                                  std::span<const FeatureMap> features, const Box& center) const
{
    const FeatureMap& ref = features[0];
    const double sigma = cfg_.sigma_factor * std::min(center.h, center.w);
    std::vector<TrainingSample> samples;
    samples.reserve(scales.size());
    for (std::size_t i = 0; i < scales.size(); ++i) {
        const FeatureMap& x = prepared[i];
        const double cr = corner_aligned(center.cy, ref.height(), x.height());
        const double cc = corner_aligned(center.cx, ref.width(), x.width());
        const double ratio = x.height() > 1 && ref.height() > 1
                                 ? static_cast<double>(x.height() - 1) / static_cast<double>(ref.height() - 1)
                                 : 1.0;
        samples.push_back({x, make_gaussian_label(x.height(), x.width(), cr, cc, sigma * ratio), static_cast<int>(i)});
    }
    return samples;
}

void Tracker::init(std::span<const FeatureMap> features, const Box& box)
{
    if (features.empty()) {
        throw DimensionError("tracker init needs at least one feature scale");
    }
    const FeatureMap& ref = features[0];
    if (!(box.h > 0.0) || !(box.w > 0.0) || !std::isfinite(box.cx) || !std::isfinite(box.cy)) {
        throw ParameterError("initial box is degenerate");
    }
    if (box.cx < 0.0 || box.cx > ref.width() - 1 || box.cy < 0.0 || box.cy > ref.height() - 1) {
        throw ParameterError("initial box centre lies outside the feature map");
    }
    for (const auto& f : features) {
        if (f.channels() != ref.channels()) {
            throw DimensionError("all feature scales must have the same channel count");
        }
    }
    const auto scales = active_scales(features.size());

    state_.weights = ClassifierWeights::random(ref.channels(), cfg_.mid_channels, cfg_.kernel1, cfg_.kernel2, cfg_.seed);
    state_.weights.lambda1 = cfg_.lambda1;
    state_.weights.lambda2 = cfg_.lambda2;
    state_.weights.hidden = cfg_.hidden;
    state_.memory = SampleMemory(cfg_.memory_capacity, cfg_.memory_decay);
    state_.last_peak = {static_cast<int>(std::lround(box.cy)), static_cast<int>(std::lround(box.cx))};
    state_.last_box = box;
    state_.frame_index = 0;

    const auto prepared = prepare(features, scales, state_.last_peak);
    state_.memory.insert_group(make_samples(prepared, scales, features, box));
    state_.weights = optimize(state_.weights, state_.memory, cfg_.init_optimizer, objective(scales.size()));
    initialized_ = true;
}

Grid2D Tracker::response(std::span<const FeatureMap> features) const
{
    if (!initialized_) {
        throw StateError("tracker used before init");
    }
    const auto scales = active_scales(features.size());
    const auto prepared = prepare(features, scales, state_.last_peak);
    Grid2D fused = fuse(prepared, scales, features);
    if (cfg_.brt_on_response()) {
        fused = brt(fused, state_.last_peak, cfg_.brt_ratio);
    }
    return fused;
}

StepResult Tracker::step(std::span<const FeatureMap> features)
{
    if (!initialized_) {
        throw StateError("tracker used before init");
    }
    if (features.empty()) {
        throw DimensionError("tracker step needs at least one feature scale");
    }
    const FeatureMap& ref = features[0];
    const auto& first = state_.memory.group(0).samples.front().features;
    if (ref.channels() != first.channels() || ref.height() != first.height() || ref.width() != first.width()) {
        throw DimensionError("frame features do not match the dimensions seen at init");
    }
    const auto scales = active_scales(features.size());
    const auto prepared = prepare(features, scales, state_.last_peak);
    Grid2D fused = fuse(prepared, scales, features);
    if (cfg_.brt_on_response()) {
        fused = brt(fused, state_.last_peak, cfg_.brt_ratio);
    }

    StepResult result;
    auto& diag = result.diagnostics;
    diag.response_stats = grid_stats(fused);
    diag.peak = diag.response_stats.argmax;
    diag.peak_value = diag.response_stats.max_value;
    diag.subpeak_count = static_cast<int>(find_subpeaks(fused, cfg_.subpeak_threshold).size());
    diag.box = peak_to_box(diag.peak, state_.last_box, fused);
    result.box = diag.box;

    state_.frame_index += 1;
    diag.frame = state_.frame_index;
    if (state_.frame_index % cfg_.update_interval == 0) {
        state_.memory.insert_group(make_samples(prepared, scales, features, diag.box));
        OptimizeReport rep;
        state_.weights = optimize(state_.weights, state_.memory, cfg_.update_optimizer, objective(scales.size()), &rep);
        if (!rep.loss_history.empty()) {
            diag.loss_after_update = rep.loss_history.back();
        }
    }
    state_.last_peak = diag.peak;
    state_.last_box = diag.box;
    result.fused = std::move(fused);
    return result;
}

}  // namespace subpeak
