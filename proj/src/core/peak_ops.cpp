#include "core/peak_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "core/errors.hpp"

namespace subpeak {

FusionWeights::FusionWeights(std::vector<double> betas)
    : betas_(std::move(betas))
{
    if (betas_.empty()) {
        throw ParameterError("fusion weights need at least one entry");
    }
    bool any_positive = false;
    for (double b : betas_) {
        if (!(b >= 0.0) || !std::isfinite(b)) {
            throw ParameterError("fusion weights must be finite and non-negative");
        }
        any_positive = any_positive || b > 0.0;
    }
    if (!any_positive) {
        throw ParameterError("at least one fusion weight must be positive");
    }
}

FusionWeights FusionWeights::uniform(int count)
{
    return FusionWeights(std::vector<double>(static_cast<std::size_t>(std::max(count, 1)), 1.0));
}

std::vector<double> FusionWeights::normalized() const
{
    const double total = std::accumulate(betas_.begin(), betas_.end(), 0.0);
    std::vector<double> out(betas_.size());
    std::transform(betas_.begin(), betas_.end(), out.begin(), [total](double b) { return b / total; });
    return out;
}

PoolingRoutes pooling_routes(const Grid2D& g)
{
    PoolingRoutes routes;
    routes.row_argmax.assign(static_cast<std::size_t>(g.height()), 0);
    routes.col_argmax.assign(static_cast<std::size_t>(g.width()), 0);
    for (int p = 0; p < g.height(); ++p) {
        int best = 0;
        for (int q = 1; q < g.width(); ++q) {
            if (g.at(p, q) > g.at(p, best)) {
                best = q;
            }
        }
        routes.row_argmax[static_cast<std::size_t>(p)] = best;
    }
    for (int q = 0; q < g.width(); ++q) {
        int best = 0;
        for (int p = 1; p < g.height(); ++p) {
            if (g.at(p, q) > g.at(best, q)) {
                best = p;
            }
        }
        routes.col_argmax[static_cast<std::size_t>(q)] = best;
    }
    return routes;
}

Grid2D prp(const Grid2D& g)
{
    std::vector<float> row_max(static_cast<std::size_t>(g.height()));
    std::vector<float> col_max(static_cast<std::size_t>(g.width()), 0.0f);
    for (int p = 0; p < g.height(); ++p) {
        const auto r = g.row(p);
        row_max[static_cast<std::size_t>(p)] = *std::max_element(r.begin(), r.end());
    }
    for (int q = 0; q < g.width(); ++q) {
        float m = g.at(0, q);
        for (int p = 1; p < g.height(); ++p) {
            m = std::max(m, g.at(p, q));
        }
        col_max[static_cast<std::size_t>(q)] = m;
    }
    Grid2D out(g.height(), g.width());
    for (int p = 0; p < g.height(); ++p) {
        for (int q = 0; q < g.width(); ++q) {
            out.at(p, q) = row_max[static_cast<std::size_t>(p)] + col_max[static_cast<std::size_t>(q)];
        }
    }
    return out;
}

Grid2D rectify(const Grid2D& g)
{
    Grid2D out = prp(g);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = g[i] + out[i];
    }
    return out;
}

Window truncation_window(int height, int width, Cell peak, double ratio)
{
    if (!(ratio >= 0.0 && ratio <= 1.0)) {
        throw ParameterError("truncation ratio must lie in [0, 1]");
    }
    if (peak.row < 0 || peak.row >= height || peak.col < 0 || peak.col >= width) {
        throw ParameterError("truncation peak (" + std::to_string(peak.row) + ", " + std::to_string(peak.col) +
                             ") lies outside the grid");
    }
    const auto keep = [ratio](int n) {
        return static_cast<int>(std::clamp<long>(std::lround((1.0 - ratio) * n), 1L, static_cast<long>(n)));
    };
    Window win;
    win.height = keep(height);
    win.width = keep(width);
    win.top = std::clamp(peak.row - (win.height - 1) / 2, 0, height - win.height);
    win.left = std::clamp(peak.col - (win.width - 1) / 2, 0, width - win.width);
    return win;
}

Grid2D brt(const Grid2D& g, Cell peak, double ratio)
{
    const Window win = truncation_window(g.height(), g.width(), peak, ratio);
    Grid2D out(g.height(), g.width());
    for (int p = win.top; p < win.top + win.height; ++p) {
        for (int q = win.left; q < win.left + win.width; ++q) {
            out.at(p, q) = g.at(p, q);
        }
    }
    return out;
}

Grid2D fuse_responses(std::span<const Grid2D> maps, const FusionWeights& weights)
{
    if (maps.empty() || maps.size() != weights.size()) {
        throw ParameterError("fusion needs one weight per response map (" + std::to_string(maps.size()) + " maps, " +
                             std::to_string(weights.size()) + " weights)");
    }
    for (const auto& m : maps) {
        if (!m.same_shape(maps.front())) {
            throw ParameterError("fused response maps must share dimensions");
        }
    }
    const auto beta = weights.normalized();
    const Grid2D& first = maps.front();
    Grid2D out(first.height(), first.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < maps.size(); ++j) {
            acc += beta[j] * maps[j][i];
        }
        out[i] = static_cast<float>(acc);
    }
    return out;
}

PeakList find_subpeaks(const Grid2D& g, double rel_threshold)
{
    if (!(rel_threshold > 0.0 && rel_threshold <= 1.0)) {
        throw ParameterError("sub-peak threshold must lie in (0, 1]");
    }
    PeakList peaks;
    if (g.empty()) {
        return peaks;
    }
    const float gmax = *std::max_element(g.values().begin(), g.values().end());
    const double threshold = gmax - (1.0 - rel_threshold) * std::abs(static_cast<double>(gmax));

    const int h = g.height();
    const int w = g.width();
    // 0 = unvisited, 1 = resolved
    std::vector<unsigned char> visited(g.size(), 0);
    std::vector<Cell> stack;
    std::vector<Cell> region;

    for (int p = 0; p < h; ++p) {
        for (int q = 0; q < w; ++q) {
            const std::size_t idx = static_cast<std::size_t>(p) * static_cast<std::size_t>(w) + static_cast<std::size_t>(q);
            if (visited[idx]) {
                continue;
            }
            const float v = g.at(p, q);
            // Flood the equal-valued 8-connected region containing (p, q); the
            // scan order makes (p, q) its lexicographically smallest cell.
            bool dominated = false;
            region.clear();
            stack.clear();
            stack.push_back({p, q});
            visited[idx] = 1;
            while (!stack.empty()) {
                const Cell c = stack.back();
                stack.pop_back();
                region.push_back(c);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) {
                            continue;
                        }
                        const int r = c.row + dy;
                        const int s = c.col + dx;
                        if (r < 0 || r >= h || s < 0 || s >= w) {
                            continue;
                        }
                        const float nv = g.at(r, s);
                        if (nv > v) {
                            dominated = true;
                        } else if (nv == v) {
                            const std::size_t nidx =
                                static_cast<std::size_t>(r) * static_cast<std::size_t>(w) + static_cast<std::size_t>(s);
                            if (!visited[nidx]) {
                                visited[nidx] = 1;
                                stack.push_back({r, s});
                            }
                        }
                    }
                }
            }
            if (!dominated && v >= threshold) {
                peaks.push_back({p, q, v});
            }
        }
    }
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        if (a.value != b.value) {
            return a.value > b.value;
        }
        if (a.row != b.row) {
            return a.row < b.row;
        }
        return a.col < b.col;
    });
    return peaks;
}

}  // namespace subpeak
