#pragma once

#include <span>
#include <vector>

#include "core/grid.hpp"

namespace subpeak {

struct Peak {
    int row = 0;
    int col = 0;
    float value = 0.0f;

    friend bool operator==(const Peak&, const Peak&) = default;
};

// Sorted by descending value, ties by (row, col) ascending.
using PeakList = std::vector<Peak>;

class FusionWeights {
public:
    FusionWeights() = default;
    explicit FusionWeights(std::vector<double> betas);

    static FusionWeights uniform(int count);

    std::size_t size() const { return betas_.size(); }
    std::span<const double> betas() const { return betas_; }
    // betas divided by their sum
    std::vector<double> normalized() const;

private:
    std::vector<double> betas_;
};

// Row/column maximum locations of a grid, lowest index on ties. These are the
// cells that carry the subgradient of the pooling operator.
struct PoolingRoutes {
    std::vector<int> row_argmax;  // per row: column of its maximum
    std::vector<int> col_argmax;  // per column: row of its maximum
};

PoolingRoutes pooling_routes(const Grid2D& g);

// Peak response pooling: out[p,q] = max(row p) + max(column q).
Grid2D prp(const Grid2D& g);

// g + prp(g)
Grid2D rectify(const Grid2D& g);

struct Window {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;

    bool contains(int r, int c) const { return r >= top && r < top + height && c >= left && c < left + width; }
};

// Window kept by boundary response truncation: (1 - ratio) of each dimension,
// centred on the peak (even sizes extend one extra cell toward larger
// indices), then shifted to lie inside the grid.
Window truncation_window(int height, int width, Cell peak, double ratio);

// Zeroes every pixel outside truncation_window(...).
Grid2D brt(const Grid2D& g, Cell peak, double ratio);

Grid2D fuse_responses(std::span<const Grid2D> maps, const FusionWeights& weights);

// Strict 8-neighbourhood maxima with value >= threshold, where the threshold is
// rel_threshold * global max (for a non-positive max the same relative margin
// is measured below it). A connected plateau of equal values whose outer
// boundary is strictly lower counts once, at its lexicographically smallest
// cell.
PeakList find_subpeaks(const Grid2D& g, double rel_threshold);

}  // namespace subpeak
