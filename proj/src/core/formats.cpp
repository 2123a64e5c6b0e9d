#include "core/formats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "core/errors.hpp"

namespace subpeak {

namespace {

static_assert(std::numeric_limits<float>::is_iec559 && std::numeric_limits<double>::is_iec559);

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void expect_magic(const char* magic)
    {
        need(4);
        if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0) {
            throw IoError(std::string("bad magic, expected ") + magic);
        }
        pos_ += 4;
    }

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n) {
            throw IoError("truncated file");
        }
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

int checked_dim(std::uint32_t v, const char* what)
{
    if (v == 0 || v > (1u << 20)) {
        throw IoError(std::string("implausible ") + what + " in header");
    }
    return static_cast<int>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_spsf(const FeatureMap& map)
{
    std::vector<std::uint8_t> out{'S', 'P', 'S', 'F'};
    put_u32(out, static_cast<std::uint32_t>(map.channels()));
    put_u32(out, static_cast<std::uint32_t>(map.height()));
    put_u32(out, static_cast<std::uint32_t>(map.width()));
    out.reserve(out.size() + 4 * static_cast<std::size_t>(map.channels()) * static_cast<std::size_t>(map.height()) *
                                 static_cast<std::size_t>(map.width()));
    for (const auto& g : map.grids()) {
        for (float v : g.values()) {
            put_u32(out, std::bit_cast<std::uint32_t>(v));
        }
    }
    return out;
}

FeatureMap decode_spsf(std::span<const std::uint8_t> bytes)
{
    Reader rd(bytes);
    rd.expect_magic("SPSF");
    const int c = checked_dim(rd.u32(), "channel count");
    const int h = checked_dim(rd.u32(), "height");
    const int w = checked_dim(rd.u32(), "width");
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    rd.need(4 * plane * static_cast<std::size_t>(c));
    std::vector<Grid2D> grids;
    grids.reserve(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        std::vector<float> vals(plane);
        for (auto& v : vals) {
            v = rd.f32();
        }
        try {
            grids.emplace_back(h, w, std::move(vals));
        } catch (const Error& e) {
            throw IoError(std::string("invalid SPSF payload: ") + e.what());
        }
    }
    if (rd.remaining() != 0) {
        throw IoError("trailing bytes after SPSF payload");
    }
    return FeatureMap(std::move(grids));
}

void write_spsf(const std::filesystem::path& path, const FeatureMap& map)
{
    write_file(path, encode_spsf(map));
}

void write_spsf(const std::filesystem::path& path, const Grid2D& grid)
{
    write_file(path, encode_spsf(FeatureMap(std::vector<Grid2D>{grid})));
}

FeatureMap read_spsf(const std::filesystem::path& path)
{
    return decode_spsf(read_file(path));
}

Grid2D read_spsf_grid(const std::filesystem::path& path)
{
    FeatureMap m = read_spsf(path);
    if (m.channels() != 1) {
        throw IoError(path.string() + " holds " + std::to_string(m.channels()) + " channels, expected a single grid");
    }
    return m.channel(0);
}

std::vector<std::uint8_t> encode_weights(const ClassifierWeights& w)
{
    std::vector<std::uint8_t> out{'S', 'P', 'S', 'W'};
    put_u32(out, 2);
    for (const ConvKernel* k : {&w.w1, &w.w2}) {
        put_u32(out, static_cast<std::uint32_t>(k->out_channels));
        put_u32(out, static_cast<std::uint32_t>(k->in_channels));
        put_u32(out, static_cast<std::uint32_t>(k->kernel_h));
        put_u32(out, static_cast<std::uint32_t>(k->kernel_w));
        for (double v : k->weights) {
            put_u64(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    return out;
}

ClassifierWeights decode_weights(std::span<const std::uint8_t> bytes, const ClassifierWeights& base)
{
    Reader rd(bytes);
    rd.expect_magic("SPSW");
    if (rd.u32() != 2) {
        throw IoError("weights file must hold exactly two layers");
    }
    ClassifierWeights w = base;
    for (ConvKernel* k : {&w.w1, &w.w2}) {
        const int o = checked_dim(rd.u32(), "output channels");
        const int i = checked_dim(rd.u32(), "input channels");
        const int kh = checked_dim(rd.u32(), "kernel height");
        const int kw = checked_dim(rd.u32(), "kernel width");
        std::vector<double> vals(static_cast<std::size_t>(o) * static_cast<std::size_t>(i) * static_cast<std::size_t>(kh) *
                                 static_cast<std::size_t>(kw));
        rd.need(8 * vals.size());
        for (auto& v : vals) {
            v = rd.f64();
        }
        try {
            *k = ConvKernel(o, i, kh, kw, std::move(vals));
        } catch (const Error& e) {
            throw IoError(std::string("invalid layer in weights file: ") + e.what());
        }
    }
    if (rd.remaining() != 0) {
        throw IoError("trailing bytes after weights payload");
    }
    try {
        w.validate();
    } catch (const Error& e) {
        throw IoError(std::string("inconsistent weights file: ") + e.what());
    }
    return w;
}

void write_weights(const std::filesystem::path& path, const ClassifierWeights& w)
{
    write_file(path, encode_weights(w));
}

ClassifierWeights read_weights(const std::filesystem::path& path, const ClassifierWeights& base)
{
    return decode_weights(read_file(path), base);
}

std::vector<std::uint8_t> encode_pgm(const Grid2D& g)
{
    const std::string header = "P5\n" + std::to_string(g.width()) + " " + std::to_string(g.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const auto [lo_it, hi_it] = std::minmax_element(g.values().begin(), g.values().end());
    const double lo = *lo_it;
    const double range = static_cast<double>(*hi_it) - lo;
    for (float v : g.values()) {
        std::uint8_t px = 0;
        if (range > 0.0) {
            px = static_cast<std::uint8_t>(std::clamp(std::lround((v - lo) / range * 255.0), 0L, 255L));
        }
        out.push_back(px);
    }
    return out;
}

void write_pgm(const std::filesystem::path& path, const Grid2D& g)
{
    write_file(path, encode_pgm(g));
}

std::string encode_grid_csv(const Grid2D& g)
{
    std::string out;
    char buf[64];
    for (int p = 0; p < g.height(); ++p) {
        for (int q = 0; q < g.width(); ++q) {
            if (q > 0) {
                out.push_back(',');
            }
            const auto res = std::to_chars(buf, buf + sizeof(buf), g.at(p, q));
            out.append(buf, res.ptr);
        }
        out.push_back('\n');
    }
    return out;
}

Grid2D decode_grid_csv(const std::string& text)
{
    std::vector<float> vals;
    int rows = 0;
    int cols = -1;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        int count = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p <= end) {
            const char* comma = std::find(p, end, ',');
            float v = 0.0f;
            const auto res = std::from_chars(p, comma, v);
            if (res.ec != std::errc{} || res.ptr != comma) {
                throw IoError("malformed number in grid CSV row " + std::to_string(rows + 1));
            }
            vals.push_back(v);
            ++count;
            p = comma + 1;
        }
        if (cols >= 0 && count != cols) {
            throw IoError("ragged grid CSV");
        }
        cols = count;
        ++rows;
    }
    if (rows == 0) {
        throw IoError("empty grid CSV");
    }
    return Grid2D(rows, cols, std::move(vals));
}

void export_heatmap(const Grid2D& g, const std::filesystem::path& pgm_path, const std::filesystem::path& csv_path)
{
    write_pgm(pgm_path, g);
    if (!csv_path.empty()) {
        write_text(csv_path, encode_grid_csv(g));
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

}  // namespace subpeak
