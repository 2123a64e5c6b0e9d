#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace subpeak {

struct Cell {
    int row = 0;
    int col = 0;

    friend bool operator==(const Cell&, const Cell&) = default;
};

// Dense single-channel raster, row-major, 32-bit storage.
class Grid2D {
public:
    Grid2D() = default;
    Grid2D(int height, int width, float fill = 0.0f);
    Grid2D(int height, int width, std::vector<float> values);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    float& at(int row, int col) { return values_[index(row, col)]; }
    float at(int row, int col) const { return values_[index(row, col)]; }
    float& operator[](std::size_t i) { return values_[i]; }
    float operator[](std::size_t i) const { return values_[i]; }

    std::span<float> values() { return values_; }
    std::span<const float> values() const { return values_; }
    std::span<float> row(int r) { return {values_.data() + index(r, 0), static_cast<std::size_t>(width_)}; }
    std::span<const float> row(int r) const
    {
        return {values_.data() + index(r, 0), static_cast<std::size_t>(width_)};
    }

    bool contains(Cell c) const { return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_; }
    bool same_shape(const Grid2D& other) const { return height_ == other.height_ && width_ == other.width_; }

    friend bool operator==(const Grid2D&, const Grid2D&) = default;

private:
    std::size_t index(int row, int col) const
    {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<float> values_;
};

// C x H x W stack of equally sized grids.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int channels, int height, int width);
    explicit FeatureMap(std::vector<Grid2D> grids);

    int channels() const { return static_cast<int>(grids_.size()); }
    int height() const { return grids_.empty() ? 0 : grids_.front().height(); }
    int width() const { return grids_.empty() ? 0 : grids_.front().width(); }

    Grid2D& channel(int c) { return grids_.at(static_cast<std::size_t>(c)); }
    const Grid2D& channel(int c) const { return grids_.at(static_cast<std::size_t>(c)); }
    std::span<Grid2D> grids() { return grids_; }
    std::span<const Grid2D> grids() const { return grids_; }

    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

private:
    std::vector<Grid2D> grids_;
};

// Convolution kernel bank, weights laid out [out][in][kh][kw]. Spatial dims are
// odd so that "same" padding is symmetric.
struct ConvKernel {
    int out_channels = 0;
    int in_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    std::vector<double> weights;

    ConvKernel() = default;
    ConvKernel(int out_ch, int in_ch, int kh, int kw);
    ConvKernel(int out_ch, int in_ch, int kh, int kw, std::vector<double> w);

    std::size_t slice_size() const { return static_cast<std::size_t>(kernel_h) * static_cast<std::size_t>(kernel_w); }
    std::size_t offset(int o, int i) const
    {
        return (static_cast<std::size_t>(o) * static_cast<std::size_t>(in_channels) + static_cast<std::size_t>(i)) *
               slice_size();
    }
    double& at(int o, int i, int ky, int kx) { return weights[offset(o, i) + static_cast<std::size_t>(ky * kernel_w + kx)]; }
    double at(int o, int i, int ky, int kx) const
    {
        return weights[offset(o, i) + static_cast<std::size_t>(ky * kernel_w + kx)];
    }

    friend bool operator==(const ConvKernel&, const ConvKernel&) = default;
};

struct GridStats {
    float max_value = 0.0f;
    Cell argmax;
    double mean = 0.0;
    double variance = 0.0;
    double energy = 0.0;
};

// Multi-channel 2D cross-correlation with "same" zero padding.
// Accumulates in double per output pixel: input channel, kernel row, kernel col.
FeatureMap conv2d_mc(const FeatureMap& input, const ConvKernel& kernel);

// Low-level double-precision variant used by the classifier. `in` is C_in
// planes of h*w, `out` receives C_out planes of h*w and is overwritten.
void conv2d_same(std::span<const double> in, int h, int w, const ConvKernel& kernel, std::span<double> out);

Grid2D make_gaussian_label(int h, int w, double center_row, double center_col, double sigma);

GridStats grid_stats(const Grid2D& g);

// Corner-aligned bilinear resampling; output is clamped into the input range.
Grid2D resample_bilinear(const Grid2D& g, int new_h, int new_w);

// Maps an index on an axis of length `from` onto the corner-aligned axis of
// length `to`.
double corner_aligned(double index, int from, int to);

double energy(const Grid2D& g);

}  // namespace subpeak
