#include "core/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/errors.hpp"

namespace subpeak {

double iou(const Box& a, const Box& b)
{
    const double ix = std::min(a.cx + a.w / 2.0, b.cx + b.w / 2.0) - std::max(a.cx - a.w / 2.0, b.cx - b.w / 2.0);
    const double iy = std::min(a.cy + a.h / 2.0, b.cy + b.h / 2.0) - std::max(a.cy - a.h / 2.0, b.cy - b.h / 2.0);
    if (ix <= 0.0 || iy <= 0.0) {
        return 0.0;
    }
    const double inter = ix * iy;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double center_error(const Box& a, const Box& b)
{
    return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

Curves precision_success(std::span<const Box> pred, std::span<const Box> gt)
{
    if (pred.size() != gt.size()) {
        throw DimensionError("prediction count " + std::to_string(pred.size()) + " differs from ground truth count " +
                             std::to_string(gt.size()));
    }
    Curves c;
    std::vector<double> errors(pred.size());
    std::vector<double> overlaps(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        errors[i] = center_error(pred[i], gt[i]);
        overlaps[i] = iou(pred[i], gt[i]);
    }
    const double n = static_cast<double>(pred.size());
    for (int t = 0; t < kPrecisionThresholds; ++t) {
        const double thr = t;
        const auto hit = std::count_if(errors.begin(), errors.end(), [thr](double e) { return e <= thr; });
        c.precision.emplace_back(thr, n > 0 ? static_cast<double>(hit) / n : 0.0);
    }
    for (int t = 0; t < kSuccessThresholds; ++t) {
        const double thr = t / static_cast<double>(kSuccessThresholds - 1);
        const auto hit = std::count_if(overlaps.begin(), overlaps.end(), [thr](double o) { return o > thr; });
        c.success.emplace_back(thr, n > 0 ? static_cast<double>(hit) / n : 0.0);
    }
    double auc = 0.0;
    for (std::size_t i = 1; i < c.success.size(); ++i) {
        auc += 0.5 * (c.success[i - 1].second + c.success[i].second) * (c.success[i].first - c.success[i - 1].first);
    }
    c.success_auc = auc;
    return c;
}

VotOutcome run_vot(TrackerClosure& tracker, std::span<const Box> gt)
{
    const int n = static_cast<int>(gt.size());
    VotOutcome out;
    out.boxes.assign(gt.begin(), gt.end());
    out.evaluated.assign(gt.size(), 0);
    if (n == 0) {
        return out;
    }
    tracker.init(0, gt[0]);
    int f = 1;
    while (f < n) {
        const Box pred = tracker.step(f);
        out.boxes[static_cast<std::size_t>(f)] = pred;
        out.evaluated[static_cast<std::size_t>(f)] = 1;
        if (iou(pred, gt[static_cast<std::size_t>(f)]) == 0.0) {
            ++out.failures;
            out.failure_frames.push_back(f);
            const int reinit = f + kReinitDelay;
            if (reinit >= n) {
                break;
            }
            tracker.init(reinit, gt[static_cast<std::size_t>(reinit)]);
            f = reinit + 1;
            continue;
        }
        ++f;
    }
    return out;
}

int vot_robustness(TrackerClosure& tracker, std::span<const Box> gt)
{
    return run_vot(tracker, gt).failures;
}

EvalResult evaluate_run(std::span<const Box> pred, std::span<const Box> gt, std::span<const std::uint8_t> evaluated,
                        std::span<const int> subpeaks, int failures)
{
    if (pred.size() != gt.size() || (!evaluated.empty() && evaluated.size() != gt.size()) ||
        (!subpeaks.empty() && subpeaks.size() != gt.size())) {
        throw DimensionError("run, ground truth and mask lengths differ");
    }
    std::vector<Box> p;
    std::vector<Box> g;
    double err = 0.0;
    double peaks = 0.0;
    int single = 0;
    int counted_peaks = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!evaluated.empty() && !evaluated[i]) {
            continue;
        }
        p.push_back(pred[i]);
        g.push_back(gt[i]);
        err += center_error(pred[i], gt[i]);
        if (!subpeaks.empty()) {
            peaks += subpeaks[i];
            single += subpeaks[i] == 1 ? 1 : 0;
            ++counted_peaks;
        }
    }
    EvalResult r;
    r.curves = precision_success(p, g);
    r.failures = failures;
    r.frames = static_cast<int>(p.size());
    r.mean_center_error = p.empty() ? 0.0 : err / static_cast<double>(p.size());
    r.mean_subpeaks = counted_peaks ? peaks / counted_peaks : 0.0;
    r.single_peak_fraction = counted_peaks ? static_cast<double>(single) / counted_peaks : 0.0;
    return r;
}

double sign_test_p(int better, int worse)
{
    const int n = better + worse;
    if (n == 0) {
        return 1.0;
    }
    const int k = std::min(better, worse);
    double tail = 0.0;
    for (int i = 0; i <= k; ++i) {
        tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
    }
    return std::min(1.0, 2.0 * tail);
}

bool curves_monotone(const Curves& c)
{
    for (std::size_t i = 1; i < c.precision.size(); ++i) {
        if (c.precision[i].second < c.precision[i - 1].second) {
            return false;
        }
    }
    for (std::size_t i = 1; i < c.success.size(); ++i) {
        if (c.success[i].second > c.success[i - 1].second) {
            return false;
        }
    }
    return true;
}

}  // namespace subpeak
