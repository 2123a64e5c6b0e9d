#include "core/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/errors.hpp"

namespace subpeak {

namespace {

void check_dims(int h, int w)
{
    if (h <= 0 || w <= 0) {
        throw DimensionError("grid dimensions must be positive, got " + std::to_string(h) + "x" + std::to_string(w));
    }
}

}  // namespace

Grid2D::Grid2D(int height, int width, float fill)
    : height_(height), width_(width)
{
    check_dims(height, width);
    if (!std::isfinite(fill)) {
        throw ParameterError("grid fill value must be finite");
    }
    values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

Grid2D::Grid2D(int height, int width, std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values))
{
    check_dims(height, width);
    if (values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
        throw DimensionError("grid value count " + std::to_string(values_.size()) + " does not match " +
                             std::to_string(height) + "x" + std::to_string(width));
    }
    for (float v : values_) {
        if (!std::isfinite(v)) {
            throw ParameterError("grid values must be finite");
        }
    }
}

FeatureMap::FeatureMap(int channels, int height, int width)
{
    if (channels <= 0) {
        throw DimensionError("feature map needs at least one channel");
    }
    grids_.assign(static_cast<std::size_t>(channels), Grid2D(height, width));
}

FeatureMap::FeatureMap(std::vector<Grid2D> grids)
    : grids_(std::move(grids))
{
    if (grids_.empty()) {
        throw DimensionError("feature map needs at least one channel");
    }
    for (const auto& g : grids_) {
        if (!g.same_shape(grids_.front())) {
            throw DimensionError("feature map channels must share dimensions");
        }
    }
}

ConvKernel::ConvKernel(int out_ch, int in_ch, int kh, int kw)
    : ConvKernel(out_ch, in_ch, kh, kw,
                 std::vector<double>(static_cast<std::size_t>(std::max(0, out_ch * in_ch * kh * kw)), 0.0))
{
}

ConvKernel::ConvKernel(int out_ch, int in_ch, int kh, int kw, std::vector<double> w)
    : out_channels(out_ch), in_channels(in_ch), kernel_h(kh), kernel_w(kw), weights(std::move(w))
{
    if (out_ch <= 0 || in_ch <= 0 || kh <= 0 || kw <= 0) {
        throw DimensionError("kernel dimensions must be positive");
    }
    if (kh % 2 == 0 || kw % 2 == 0) {
        throw DimensionError("kernel spatial dimensions must be odd");
    }
    if (weights.size() != static_cast<std::size_t>(out_ch) * static_cast<std::size_t>(in_ch) * slice_size()) {
        throw DimensionError("kernel weight count does not match its dimensions");
    }
}

void conv2d_same(std::span<const double> in, int h, int w, const ConvKernel& kernel, std::span<double> out)
{
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    if (in.size() != plane * static_cast<std::size_t>(kernel.in_channels) ||
        out.size() != plane * static_cast<std::size_t>(kernel.out_channels)) {
        throw DimensionError("conv2d_same buffer sizes do not match kernel channels");
    }
    const int ry = kernel.kernel_h / 2;
    const int rx = kernel.kernel_w / 2;
    std::fill(out.begin(), out.end(), 0.0);

    for (int o = 0; o < kernel.out_channels; ++o) {
        double* dst = out.data() + plane * static_cast<std::size_t>(o);
        for (int i = 0; i < kernel.in_channels; ++i) {
            const double* src = in.data() + plane * static_cast<std::size_t>(i);
            for (int ky = 0; ky < kernel.kernel_h; ++ky) {
                const int dy = ky - ry;
                const int r0 = std::max(0, -dy);
                const int r1 = std::min(h, h - dy);
                for (int kx = 0; kx < kernel.kernel_w; ++kx) {
                    const double wt = kernel.at(o, i, ky, kx);
                    const int dx = kx - rx;
                    const int c0 = std::max(0, -dx);
                    const int c1 = std::min(w, w - dx);
                    for (int r = r0; r < r1; ++r) {
                        double* drow = dst + static_cast<std::ptrdiff_t>(r) * w;
                        const double* srow = src + static_cast<std::ptrdiff_t>(r + dy) * w + dx;
                        for (int c = c0; c < c1; ++c) {
                            drow[c] += wt * srow[c];
                        }
                    }
                }
            }
        }
    }
}

FeatureMap conv2d_mc(const FeatureMap& input, const ConvKernel& kernel)
{
    if (kernel.in_channels != input.channels()) {
        throw DimensionError("kernel expects " + std::to_string(kernel.in_channels) + " input channels, got " +
                             std::to_string(input.channels()));
    }
    const int h = input.height();
    const int w = input.width();
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);

    std::vector<double> in(plane * static_cast<std::size_t>(input.channels()));
    for (int c = 0; c < input.channels(); ++c) {
        std::copy(input.channel(c).values().begin(), input.channel(c).values().end(),
                  in.begin() + static_cast<std::ptrdiff_t>(plane * static_cast<std::size_t>(c)));
    }
    std::vector<double> out(plane * static_cast<std::size_t>(kernel.out_channels));
    conv2d_same(in, h, w, kernel, out);

    std::vector<Grid2D> grids;
    grids.reserve(static_cast<std::size_t>(kernel.out_channels));
    for (int o = 0; o < kernel.out_channels; ++o) {
        std::vector<float> vals(plane);
        for (std::size_t k = 0; k < plane; ++k) {
            vals[k] = static_cast<float>(out[plane * static_cast<std::size_t>(o) + k]);
        }
        grids.emplace_back(h, w, std::move(vals));
    }
    return FeatureMap(std::move(grids));
}

Grid2D make_gaussian_label(int h, int w, double center_row, double center_col, double sigma)
{
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ParameterError("label sigma must be positive");
    }
    Grid2D label(h, w);
    const double denom = 2.0 * sigma * sigma;
    for (int p = 0; p < h; ++p) {
        const double dr = p - center_row;
        for (int q = 0; q < w; ++q) {
            const double dc = q - center_col;
            label.at(p, q) = static_cast<float>(std::exp(-(dr * dr + dc * dc) / denom));
        }
    }
    return label;
}

GridStats grid_stats(const Grid2D& g)
{
    GridStats s;
    if (g.empty()) {
        return s;
    }
    std::size_t best = 0;
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = g[i];
        if (g[i] > g[best]) {
            best = i;
        }
        sum += v;
        sq += v * v;
    }
    const double n = static_cast<double>(g.size());
    s.max_value = g[best];
    s.argmax = {static_cast<int>(best / static_cast<std::size_t>(g.width())),
                static_cast<int>(best % static_cast<std::size_t>(g.width()))};
    s.mean = sum / n;
    double var = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = g[i] - s.mean;
        var += d * d;
    }
    s.variance = var / n;
    s.energy = sq;
    return s;
}

double corner_aligned(double index, int from, int to)
{
    if (to <= 1) {
        return 0.0;
    }
    if (from <= 1) {
        return (to - 1) * 0.5;
    }
    return index * static_cast<double>(to - 1) / static_cast<double>(from - 1);
}

Grid2D resample_bilinear(const Grid2D& g, int new_h, int new_w)
{
    if (new_h < 1 || new_w < 1) {
        throw DimensionError("resample target dimensions must be at least 1");
    }
    if (new_h == g.height() && new_w == g.width()) {
        return g;
    }
    const auto [lo_it, hi_it] = std::minmax_element(g.values().begin(), g.values().end());
    const float lo = *lo_it;
    const float hi = *hi_it;

    Grid2D out(new_h, new_w);
    for (int p = 0; p < new_h; ++p) {
        const double sy = corner_aligned(p, new_h, g.height());
        const int y0 = std::min(static_cast<int>(std::floor(sy)), g.height() - 1);
        const int y1 = std::min(y0 + 1, g.height() - 1);
        const double ty = sy - y0;
        for (int q = 0; q < new_w; ++q) {
            const double sx = corner_aligned(q, new_w, g.width());
            const int x0 = std::min(static_cast<int>(std::floor(sx)), g.width() - 1);
            const int x1 = std::min(x0 + 1, g.width() - 1);
            const double tx = sx - x0;
            const double top = (1.0 - tx) * g.at(y0, x0) + tx * g.at(y0, x1);
            const double bottom = (1.0 - tx) * g.at(y1, x0) + tx * g.at(y1, x1);
            const auto v = static_cast<float>((1.0 - ty) * top + ty * bottom);
            out.at(p, q) = std::clamp(v, lo, hi);
        }
    }
    return out;
}

double energy(const Grid2D& g)
{
    double e = 0.0;
    for (float v : g.values()) {
        e += static_cast<double>(v) * v;
    }
    return e;
}

}  // namespace subpeak
