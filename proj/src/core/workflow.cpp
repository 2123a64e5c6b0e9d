#include "core/workflow.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "core/errors.hpp"
#include "core/formats.hpp"

namespace subpeak {

namespace {

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    out.push_back(cell);
    return out;
}

double parse_number(const std::string& s, int line_no)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw IoError("line " + std::to_string(line_no) + ": expected a number, got '" + s + "'");
    }
    return v;
}

int parse_int(const std::string& s, int line_no)
{
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw IoError("line " + std::to_string(line_no) + ": expected an integer, got '" + s + "'");
    }
    return v;
}

// Header-indexed CSV table; every requested column must be present.
struct Table {
    std::map<std::string, std::size_t> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;

    std::size_t column(const std::string& name) const
    {
        const auto it = columns.find(name);
        if (it == columns.end()) {
            throw IoError("CSV lacks column '" + name + "'");
        }
        return it->second;
    }
};

Table parse_table(const std::string& text)
{
    Table t;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto cells = split_csv_line(line);
        if (header) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                t.columns[cells[i]] = i;
            }
            header = false;
            continue;
        }
        if (cells.size() != t.columns.size()) {
            throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.columns.size()) +
                          " fields, got " + std::to_string(cells.size()));
        }
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(line_no);
    }
    if (header) {
        throw IoError("CSV is empty");
    }
    return t;
}

}  // namespace

std::string frame_file_name(int frame, int scale)
{
    char buf[48];
    std::snprintf(buf, sizeof(buf), "frame_%04d_s%d.spsf", frame, scale);
    return buf;
}

std::string encode_boxes_csv(const std::vector<Box>& boxes)
{
    std::string out = "frame,cx,cy,h,w\n";
    for (std::size_t f = 0; f < boxes.size(); ++f) {
        const Box& b = boxes[f];
        out += std::to_string(f) + "," + format_double(b.cx) + "," + format_double(b.cy) + "," + format_double(b.h) +
               "," + format_double(b.w) + "\n";
    }
    return out;
}

std::vector<Box> decode_boxes_csv(const std::string& text)
{
    const Table t = parse_table(text);
    const std::size_t cf = t.column("frame");
    const std::size_t cx = t.column("cx");
    const std::size_t cy = t.column("cy");
    const std::size_t ch = t.column("h");
    const std::size_t cw = t.column("w");
    std::vector<Box> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const int ln = t.line_numbers[i];
        if (parse_int(r[cf], ln) != static_cast<int>(i)) {
            throw IoError("line " + std::to_string(ln) + ": ground truth frames must be 0, 1, 2, ...");
        }
        out.push_back({parse_number(r[cx], ln), parse_number(r[cy], ln), parse_number(r[ch], ln), parse_number(r[cw], ln)});
    }
    return out;
}

void simulate_to_directory(const SceneConfig& cfg, const std::filesystem::path& dir)
{
    const Sequence seq = gen_sequence(cfg);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    write_text(dir / "scene.cfg", to_config_text(cfg));
    write_text(dir / "gt.csv", encode_boxes_csv(ground_truth(seq)));
    for (int t = 0; t < seq.frames(); ++t) {
        const auto maps = render_features(seq, t);
        for (std::size_t s = 0; s < maps.size(); ++s) {
            write_spsf(dir / frame_file_name(t, static_cast<int>(s)), maps[s]);
        }
    }
}

SceneDirectory load_scene_directory(const std::filesystem::path& dir)
{
    SceneDirectory out;
    out.gt = decode_boxes_csv(read_text(dir / "gt.csv"));
    if (out.gt.empty()) {
        throw IoError(dir.string() + "/gt.csv has no frames");
    }
    std::size_t scales = 0;
    while (std::filesystem::exists(dir / frame_file_name(0, static_cast<int>(scales)))) {
        ++scales;
    }
    if (scales == 0) {
        throw IoError("no frame files in " + dir.string());
    }
    for (std::size_t t = 0; t < out.gt.size(); ++t) {
        std::vector<FeatureMap> maps;
        for (std::size_t s = 0; s < scales; ++s) {
            maps.push_back(read_spsf(dir / frame_file_name(static_cast<int>(t), static_cast<int>(s))));
        }
        out.frames.push_back(std::move(maps));
    }
    return out;
}

void track_directory(const std::filesystem::path& scene_dir, const TrackerConfig& cfg,
                     const std::filesystem::path& out_csv, const std::filesystem::path& heatmap_dir)
{
    const SceneDirectory scene = load_scene_directory(scene_dir);
    if (!heatmap_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(heatmap_dir, ec);
        if (ec) {
            throw IoError("cannot create " + heatmap_dir.string() + ": " + ec.message());
        }
    }
    std::function<void(int, const Grid2D&)> on_response;
    if (!heatmap_dir.empty()) {
        on_response = [&](int frame, const Grid2D& fused) {
            char stem[32];
            std::snprintf(stem, sizeof(stem), "frame_%04d", frame);
            export_heatmap(fused, heatmap_dir / (std::string(stem) + ".pgm"), heatmap_dir / (std::string(stem) + ".csv"));
        };
    }
    const PlainRun run = track_plain(cfg, scene.frames, scene.gt.front(), on_response);
    write_text(out_csv, diagnostics_csv(run.diagnostics));
}

std::vector<RunRow> decode_run_csv(const std::string& text)
{
    const Table t = parse_table(text);
    const std::size_t cf = t.column("frame");
    const std::size_t cx = t.column("cx");
    const std::size_t cy = t.column("cy");
    const std::size_t ch = t.column("h");
    const std::size_t cw = t.column("w");
    const auto sp = t.columns.find("subpeak_count");
    std::vector<RunRow> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const int ln = t.line_numbers[i];
        RunRow row;
        row.frame = parse_int(r[cf], ln);
        row.box = {parse_number(r[cx], ln), parse_number(r[cy], ln), parse_number(r[ch], ln), parse_number(r[cw], ln)};
        row.subpeaks = sp == t.columns.end() ? 0 : parse_int(r[sp->second], ln);
        out.push_back(row);
    }
    return out;
}

EvalResult evaluate_rows(const std::vector<RunRow>& run, const std::vector<Box>& gt)
{
    std::vector<Box> pred(gt);
    std::vector<std::uint8_t> mask(gt.size(), 0);
    std::vector<int> peaks(gt.size(), 0);
    int failures = 0;
    for (const auto& row : run) {
        if (row.frame < 0 || static_cast<std::size_t>(row.frame) >= gt.size()) {
            throw DimensionError("run frame " + std::to_string(row.frame) + " has no ground truth");
        }
        const auto f = static_cast<std::size_t>(row.frame);
        if (mask[f]) {
            throw DimensionError("run lists frame " + std::to_string(row.frame) + " twice");
        }
        pred[f] = row.box;
        mask[f] = 1;
        peaks[f] = row.subpeaks;
        failures += iou(row.box, gt[f]) == 0.0 ? 1 : 0;
    }
    return evaluate_run(pred, gt, mask, peaks, failures);
}

std::string eval_summary_csv(const EvalResult& r)
{
    std::ostringstream out;
    out << "metric,value\n";
    out << "frames," << r.frames << "\n";
    out << "failures," << r.failures << "\n";
    out << "success_auc," << format_double(r.curves.success_auc) << "\n";
    out << "precision_20px," << format_double(r.curves.precision[20].second) << "\n";
    out << "mean_center_error," << format_double(r.mean_center_error) << "\n";
    out << "mean_subpeaks," << format_double(r.mean_subpeaks) << "\n";
    out << "single_peak_fraction," << format_double(r.single_peak_fraction) << "\n";
    return out.str();
}

std::string eval_curves_csv(const EvalResult& r)
{
    std::ostringstream out;
    out << "curve,threshold,fraction\n";
    for (const auto& [t, v] : r.curves.precision) {
        out << "precision," << format_double(t) << "," << format_double(v) << "\n";
    }
    for (const auto& [t, v] : r.curves.success) {
        out << "success," << format_double(t) << "," << format_double(v) << "\n";
    }
    return out.str();
}

AblationOutput run_ablation(const RunConfig& cfg, int jobs)
{
    const AblationReport report = compare_configs(cfg, ablation_grid(cfg.tracker), jobs);
    return {report_csv(report), sequences_csv(report)};
}

}  // namespace subpeak
