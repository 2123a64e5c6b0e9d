#include "core/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace subpeak {

namespace {

// Stream ids for Rng::derive.
constexpr std::uint64_t kStreamLayout = 1;
constexpr std::uint64_t kStreamWalk = 2;
constexpr std::uint64_t kStreamDistractor = 3;
constexpr std::uint64_t kStreamNoise = 4;

// Sinusoidal motion: lateral amplitude in target widths, period in frames.
constexpr double kSineAmplitude = 1.0;
constexpr double kSinePeriod = 30.0;

// Deep levels render blurrier bumps and average away part of the noise.
constexpr double kDeepBlurPerFactor = 0.5;

struct Bounds {
    double lo_x, hi_x, lo_y, hi_y;
};

Bounds center_bounds(const SceneConfig& cfg)
{
    const auto axis = [](double extent, double size) {
        const double lo = std::min(size / 2.0, (extent - 1.0) / 2.0);
        const double hi = std::max(extent - 1.0 - size / 2.0, lo);
        return std::pair{lo, hi};
    };
    const auto [lx, hx] = axis(cfg.map_w, cfg.target_w);
    const auto [ly, hy] = axis(cfg.map_h, cfg.target_h);
    return {lx, hx, ly, hy};
}

std::vector<double> random_unit(Rng& rng, int channels, int begin, int end)
{
    std::vector<double> v(static_cast<std::size_t>(channels), 0.0);
    double norm = 0.0;
    for (int c = begin; c < end; ++c) {
        const double a = rng.uniform(0.2, 1.0);
        v[static_cast<std::size_t>(c)] = a;
        norm += a * a;
    }
    norm = std::sqrt(norm);
    for (double& a : v) {
        a /= norm;
    }
    return v;
}

Box box_at(const SceneConfig& cfg, double cx, double cy, int frame)
{
    const double s = std::pow(cfg.scale_drift, frame);
    return {cx, cy, cfg.target_h * s, cfg.target_w * s};
}

}  // namespace

double reflect_into(double x, double lo, double hi)
{
    const double span = hi - lo;
    if (span <= 0.0) {
        return lo;
    }
    const double period = 2.0 * span;
    double t = std::fmod(x - lo, period);
    if (t < 0.0) {
        t += period;
    }
    return t <= span ? lo + t : lo + (period - t);
}

int scaled_extent(int extent, int factor)
{
    return std::max(1, extent / factor);
}

void ScaleSpec::validate() const
{
    if (scales.empty()) {
        throw ParameterError("scale spec needs at least one level");
    }
    for (const auto& s : scales) {
        if (s.factor < 1) {
            throw ParameterError("scale factors must be integers >= 1");
        }
    }
}

void SceneConfig::validate() const
{
    if (frames < 1) {
        throw ParameterError("scene needs at least one frame");
    }
    if (map_h < 2 || map_w < 2 || channels < 1) {
        throw ParameterError("scene map must be at least 2x2 with one channel");
    }
    if (!(target_h > 0.0) || !(target_w > 0.0)) {
        throw ParameterError("target size must be positive");
    }
    if (n_distractors < 0) {
        throw ParameterError("distractor count must be non-negative");
    }
    if (!(speed >= 0.0) || !(distractor_speed >= 0.0)) {
        throw ParameterError("speeds must be non-negative");
    }
    if (!(distractor_similarity >= 0.0 && distractor_similarity <= 1.0)) {
        throw ParameterError("distractor similarity must lie in [0, 1]");
    }
    if (occlusion) {
        if (occlusion->duration < 0 || occlusion->start_frame < 0 ||
            !(occlusion->coverage >= 0.0 && occlusion->coverage <= 1.0)) {
            throw ParameterError("invalid occlusion schedule");
        }
    }
    if (!(scale_drift > 0.0) || !(noise_sigma >= 0.0)) {
        throw ParameterError("scale drift must be positive and noise sigma non-negative");
    }
    scales.validate();
}

bool Sequence::occluded(int frame) const
{
    return config.occlusion && frame >= config.occlusion->start_frame &&
           frame < config.occlusion->start_frame + config.occlusion->duration && config.occlusion->coverage > 0.0;
}

Sequence gen_sequence(const SceneConfig& cfg)
{
    cfg.validate();
    Sequence seq;
    seq.config = cfg;
    const Bounds b = center_bounds(cfg);

    Rng layout = Rng::derive(cfg.seed, kStreamLayout);
    const double x0 = layout.uniform(b.lo_x, b.hi_x);
    const double y0 = layout.uniform(b.lo_y, b.hi_y);
    const double heading = layout.uniform(0.0, 2.0 * std::numbers::pi);
    const double vx = cfg.speed * std::cos(heading);
    const double vy = cfg.speed * std::sin(heading);

    // Target appearance lives on the first half of the channels; distractors
    // mix it with a vector supported on the second half, so the two parts are
    // orthogonal and the similarity is exactly the cosine.
    const int split = cfg.channels > 1 ? (cfg.channels + 1) / 2 : cfg.channels;
    seq.target.appearance = random_unit(layout, cfg.channels, 0, split);

    seq.target.track.reserve(static_cast<std::size_t>(cfg.frames));
    if (cfg.motion == MotionModel::random_walk) {
        Rng walk = Rng::derive(cfg.seed, kStreamWalk);
        double ux = x0;
        double uy = y0;
        for (int t = 0; t < cfg.frames; ++t) {
            if (t > 0) {
                const double a = walk.uniform(0.0, 2.0 * std::numbers::pi);
                ux += cfg.speed * std::cos(a);
                uy += cfg.speed * std::sin(a);
            }
            seq.target.track.push_back(
                box_at(cfg, reflect_into(ux, b.lo_x, b.hi_x), reflect_into(uy, b.lo_y, b.hi_y), t));
        }
    } else {
        for (int t = 0; t < cfg.frames; ++t) {
            double ux = x0 + vx * t;
            double uy = y0 + vy * t;
            if (cfg.motion == MotionModel::sinusoidal) {
                const double lateral = kSineAmplitude * cfg.target_w * std::sin(2.0 * std::numbers::pi * t / kSinePeriod);
                ux += -std::sin(heading) * lateral;
                uy += std::cos(heading) * lateral;
            }
            seq.target.track.push_back(
                box_at(cfg, reflect_into(ux, b.lo_x, b.hi_x), reflect_into(uy, b.lo_y, b.hi_y), t));
        }
    }

    for (int k = 0; k < cfg.n_distractors; ++k) {
        Rng dr = Rng::derive(cfg.seed, kStreamDistractor, static_cast<std::uint64_t>(k));
        SceneObject obj;
        if (split < cfg.channels) {
            const auto other = random_unit(dr, cfg.channels, split, cfg.channels);
            const double s = cfg.distractor_similarity;
            const double c = std::sqrt(std::max(0.0, 1.0 - s * s));
            obj.appearance.resize(static_cast<std::size_t>(cfg.channels));
            for (std::size_t i = 0; i < obj.appearance.size(); ++i) {
                obj.appearance[i] = s * seq.target.appearance[i] + c * other[i];
            }
        } else {
            obj.appearance = seq.target.appearance;
        }

        const int lo_frame = cfg.frames / 3;
        const int hi_frame = std::max(lo_frame, (2 * cfg.frames) / 3);
        const int cross = std::min(cfg.frames - 1, lo_frame + static_cast<int>(dr.uniform() * (hi_frame - lo_frame + 1)));
        const Box& at_cross = seq.target.track[static_cast<std::size_t>(cross)];
        const double off_angle = dr.uniform(0.0, 2.0 * std::numbers::pi);
        const double off_mag = dr.uniform(0.0, 0.4 * cfg.target_w);
        const double cx = std::clamp(at_cross.cx + off_mag * std::cos(off_angle), b.lo_x, b.hi_x);
        const double cy = std::clamp(at_cross.cy + off_mag * std::sin(off_angle), b.lo_y, b.hi_y);
        // Cross the target path roughly at right angles.
        const double target_heading = cfg.speed > 0.0 ? heading : dr.uniform(0.0, 2.0 * std::numbers::pi);
        const double dir = target_heading + std::numbers::pi / 2.0 + dr.uniform(-std::numbers::pi / 4.0, std::numbers::pi / 4.0) +
                           (dr.uniform() < 0.5 ? std::numbers::pi : 0.0);
        const double dvx = cfg.distractor_speed * std::cos(dir);
        const double dvy = cfg.distractor_speed * std::sin(dir);
        obj.track.reserve(static_cast<std::size_t>(cfg.frames));
        for (int t = 0; t < cfg.frames; ++t) {
            const double ux = cx + dvx * (t - cross);
            const double uy = cy + dvy * (t - cross);
            obj.track.push_back({reflect_into(ux, b.lo_x, b.hi_x), reflect_into(uy, b.lo_y, b.hi_y), cfg.target_h, cfg.target_w});
        }
        seq.crossing_frames.push_back(cross);
        seq.distractors.push_back(std::move(obj));
    }
    return seq;
}

namespace {

std::vector<FeatureMap> render(const Sequence& seq, int frame_idx, const ScaleSpec& scales, int channels,
                               bool apply_occlusion)
{
    const SceneConfig& cfg = seq.config;
    if (frame_idx < 0 || frame_idx >= cfg.frames) {
        throw ParameterError("frame index " + std::to_string(frame_idx) + " out of range");
    }
    if (channels != cfg.channels) {
        throw DimensionError("sequence appearance vectors have " + std::to_string(cfg.channels) + " channels, " +
                             std::to_string(channels) + " requested");
    }
    scales.validate();

    std::vector<FeatureMap> out;
    out.reserve(scales.scales.size());
    for (std::size_t si = 0; si < scales.scales.size(); ++si) {
        const int factor = scales.scales[si].factor;
        const int hs = scaled_extent(cfg.map_h, factor);
        const int ws = scaled_extent(cfg.map_w, factor);
        const double blur = 1.0 + kDeepBlurPerFactor * (factor - 1);
        std::vector<std::vector<double>> planes(static_cast<std::size_t>(channels),
                                                std::vector<double>(static_cast<std::size_t>(hs) * static_cast<std::size_t>(ws), 0.0));

        const auto splat = [&](const SceneObject& obj, bool is_target) {
            const Box& bx = obj.track[static_cast<std::size_t>(frame_idx)];
            const double sy = bx.h / 4.0 * blur;
            const double sx = bx.w / 4.0 * blur;
            const bool occ = is_target && apply_occlusion && seq.occluded(frame_idx);
            const double occ_edge = occ ? bx.cx - bx.w / 2.0 + cfg.occlusion->coverage * bx.w : 0.0;
            for (int p = 0; p < hs; ++p) {
                const double y = corner_aligned(p, hs, cfg.map_h);
                const double ey = (y - bx.cy) * (y - bx.cy) / (2.0 * sy * sy);
                for (int q = 0; q < ws; ++q) {
                    const double x = corner_aligned(q, ws, cfg.map_w);
                    if (occ && x < occ_edge) {
                        continue;
                    }
                    const double ex = (x - bx.cx) * (x - bx.cx) / (2.0 * sx * sx);
                    const double bump = std::exp(-(ey + ex));
                    const std::size_t k = static_cast<std::size_t>(p) * static_cast<std::size_t>(ws) + static_cast<std::size_t>(q);
                    for (int c = 0; c < channels; ++c) {
                        const double a = obj.appearance[static_cast<std::size_t>(c)];
                        if (a != 0.0) {
                            planes[static_cast<std::size_t>(c)][k] += a * bump;
                        }
                    }
                }
            }
        };
        splat(seq.target, true);
        for (const auto& d : seq.distractors) {
            splat(d, false);
        }

        std::vector<Grid2D> grids;
        grids.reserve(static_cast<std::size_t>(channels));
        const double sigma = cfg.noise_sigma / factor;
        Rng noise = Rng::derive(cfg.seed ^ 0xA5A5A5A5ULL, kStreamNoise + static_cast<std::uint64_t>(frame_idx) * 16,
                                static_cast<std::uint64_t>(si));
        for (int c = 0; c < channels; ++c) {
            auto& plane = planes[static_cast<std::size_t>(c)];
            std::vector<float> vals(plane.size());
            for (std::size_t k = 0; k < plane.size(); ++k) {
                const double n = sigma > 0.0 ? sigma * noise.normal() : 0.0;
                vals[k] = static_cast<float>(plane[k] + n);
            }
            grids.emplace_back(hs, ws, std::move(vals));
        }
        out.emplace_back(std::move(grids));
    }
    return out;
}

}  // namespace

std::vector<FeatureMap> render_features(const Sequence& seq, int frame_idx, const ScaleSpec& scales, int channels)
{
    return render(seq, frame_idx, scales, channels, true);
}

std::vector<FeatureMap> render_features(const Sequence& seq, int frame_idx)
{
    return render(seq, frame_idx, seq.config.scales, seq.config.channels, true);
}

std::vector<FeatureMap> render_unoccluded(const Sequence& seq, int frame_idx)
{
    return render(seq, frame_idx, seq.config.scales, seq.config.channels, false);
}

std::vector<Box> ground_truth(const Sequence& seq)
{
    return seq.target.track;
}

}  // namespace subpeak
