#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "core/classifier.hpp"
#include "core/grid.hpp"

namespace subpeak {

// SPSF: "SPSF", u32 C, u32 H, u32 W, then C*H*W float32, channel-major then
// row-major; all little-endian. A Grid2D is the C == 1 case.
std::vector<std::uint8_t> encode_spsf(const FeatureMap& map);
FeatureMap decode_spsf(std::span<const std::uint8_t> bytes);
void write_spsf(const std::filesystem::path& path, const FeatureMap& map);
void write_spsf(const std::filesystem::path& path, const Grid2D& grid);
FeatureMap read_spsf(const std::filesystem::path& path);
Grid2D read_spsf_grid(const std::filesystem::path& path);

// SPSW: "SPSW", u32 layer count, then per layer u32 out, in, kh, kw followed
// by out*in*kh*kw float64 weights; all little-endian.
std::vector<std::uint8_t> encode_weights(const ClassifierWeights& w);
// Regularizers and activation are not part of the file; they come from `base`.
ClassifierWeights decode_weights(std::span<const std::uint8_t> bytes, const ClassifierWeights& base = {});
void write_weights(const std::filesystem::path& path, const ClassifierWeights& w);
ClassifierWeights read_weights(const std::filesystem::path& path, const ClassifierWeights& base = {});

// Binary PGM (P5, maxval 255) after min-max normalisation; a constant grid
// maps to all zeros.
std::vector<std::uint8_t> encode_pgm(const Grid2D& g);
void write_pgm(const std::filesystem::path& path, const Grid2D& g);

// Plain CSV of the raw values, one grid row per line, shortest round-trip
// float formatting.
std::string encode_grid_csv(const Grid2D& g);
Grid2D decode_grid_csv(const std::string& text);

void export_heatmap(const Grid2D& g, const std::filesystem::path& pgm_path,
                    const std::filesystem::path& csv_path = {});

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace subpeak
