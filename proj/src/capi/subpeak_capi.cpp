#include "subpeak/subpeak.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "core/bench.hpp"
#include "core/errors.hpp"
#include "core/formats.hpp"
#include "core/peak_ops.hpp"
#include "core/tracker.hpp"
#include "core/workflow.hpp"

struct spk_grid {
    subpeak::Grid2D g;
};

struct spk_features {
    subpeak::FeatureMap f;
};

struct spk_tracker {
    subpeak::Tracker t;
    std::optional<subpeak::Grid2D> last;
};

namespace {

thread_local std::string last_error;

spk_status fail(spk_status s, const char* what)
{
    last_error = what;
    return s;
}

template <class F>
spk_status guarded(F&& body)
{
    try {
        body();
        last_error.clear();
        return SPK_OK;
    } catch (const subpeak::DimensionError& e) {
        return fail(SPK_ERR_DIMENSION, e.what());
    } catch (const subpeak::ParameterError& e) {
        return fail(SPK_ERR_PARAMETER, e.what());
    } catch (const subpeak::StateError& e) {
        return fail(SPK_ERR_STATE, e.what());
    } catch (const subpeak::IoError& e) {
        return fail(SPK_ERR_IO, e.what());
    } catch (const subpeak::ConfigError& e) {
        return fail(SPK_ERR_CONFIG, e.what());
    } catch (const std::bad_alloc&) {
        return fail(SPK_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(SPK_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(SPK_ERR_INTERNAL, "unknown error");
    }
}

void need(const void* p, const char* what)
{
    if (p == nullptr) {
        throw subpeak::ParameterError(std::string(what) + " must not be NULL");
    }
}

char* dup_string(const std::string& s)
{
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <class T>
spk_status emit_grid(T&& make, spk_grid** out)
{
    return guarded([&] {
        need(out, "out");
        *out = nullptr;
        *out = new spk_grid{make()};
    });
}

std::vector<subpeak::FeatureMap> gather(const spk_features* const* scales, int n)
{
    need(scales, "scales");
    if (n < 1) {
        throw subpeak::DimensionError("at least one feature scale is required");
    }
    std::vector<subpeak::FeatureMap> maps;
    maps.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        need(scales[i], "feature scale");
        maps.push_back(scales[i]->f);
    }
    return maps;
}

}  // namespace

extern "C" {

const char* spk_last_error(void)
{
    return last_error.c_str();
}

const char* spk_version(void)
{
    return "0.1.0";
}

void spk_string_free(char* s)
{
    std::free(s);
}

spk_status spk_grid_create(int height, int width, const float* values, spk_grid** out)
{
    return emit_grid(
        [&] {
            if (values == nullptr) {
                return subpeak::Grid2D(height, width, 0.0f);
            }
            if (height < 1 || width < 1) {
                throw subpeak::DimensionError("grid dimensions must be positive");
            }
            const auto n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
            return subpeak::Grid2D(height, width, std::vector<float>(values, values + n));
        },
        out);
}

void spk_grid_destroy(spk_grid* g)
{
    delete g;
}

int spk_grid_height(const spk_grid* g)
{
    return g ? g->g.height() : 0;
}

int spk_grid_width(const spk_grid* g)
{
    return g ? g->g.width() : 0;
}

spk_status spk_grid_values(const spk_grid* g, float* dst, size_t count)
{
    return guarded([&] {
        need(g, "grid");
        need(dst, "dst");
        if (count != g->g.values().size()) {
            throw subpeak::DimensionError("destination holds " + std::to_string(count) + " values, grid has " +
                                          std::to_string(g->g.values().size()));
        }
        std::copy(g->g.values().begin(), g->g.values().end(), dst);
    });
}

spk_status spk_grid_read_spsf(const char* path, spk_grid** out)
{
    return emit_grid(
        [&] {
            need(path, "path");
            return subpeak::read_spsf_grid(path);
        },
        out);
}

spk_status spk_grid_write_spsf(const spk_grid* g, const char* path)
{
    return guarded([&] {
        need(g, "grid");
        need(path, "path");
        subpeak::write_spsf(path, g->g);
    });
}

spk_status spk_grid_prp(const spk_grid* g, spk_grid** out)
{
    return emit_grid(
        [&] {
            need(g, "grid");
            return subpeak::prp(g->g);
        },
        out);
}

spk_status spk_grid_rectify(const spk_grid* g, spk_grid** out)
{
    return emit_grid(
        [&] {
            need(g, "grid");
            return subpeak::rectify(g->g);
        },
        out);
}

spk_status spk_grid_brt(const spk_grid* g, int peak_row, int peak_col, double ratio, spk_grid** out)
{
    return emit_grid(
        [&] {
            need(g, "grid");
            return subpeak::brt(g->g, {peak_row, peak_col}, ratio);
        },
        out);
}

spk_status spk_grid_count_subpeaks(const spk_grid* g, double rel_threshold, int* count)
{
    return guarded([&] {
        need(g, "grid");
        need(count, "count");
        *count = static_cast<int>(subpeak::find_subpeaks(g->g, rel_threshold).size());
    });
}

spk_status spk_grid_export_heatmap(const spk_grid* g, const char* pgm_path, const char* csv_path)
{
    return guarded([&] {
        need(g, "grid");
        need(pgm_path, "pgm_path");
        subpeak::export_heatmap(g->g, pgm_path, csv_path ? std::filesystem::path(csv_path) : std::filesystem::path());
    });
}

spk_status spk_features_read_spsf(const char* path, spk_features** out)
{
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        *out = new spk_features{subpeak::read_spsf(path)};
    });
}

void spk_features_destroy(spk_features* f)
{
    delete f;
}

int spk_features_channels(const spk_features* f)
{
    return f ? f->f.channels() : 0;
}

int spk_features_height(const spk_features* f)
{
    return f ? f->f.height() : 0;
}

int spk_features_width(const spk_features* f)
{
    return f ? f->f.width() : 0;
}

spk_status spk_tracker_create(const char* config_path, spk_tracker** out)
{
    return guarded([&] {
        need(out, "out");
        *out = nullptr;
        subpeak::TrackerConfig cfg = config_path ? subpeak::load_tracker_config(config_path) : subpeak::TrackerConfig{};
        *out = new spk_tracker{subpeak::Tracker(std::move(cfg)), std::nullopt};
    });
}

void spk_tracker_destroy(spk_tracker* t)
{
    delete t;
}

spk_status spk_tracker_init(spk_tracker* t, const spk_features* const* scales, int n_scales, const spk_box* box)
{
    return guarded([&] {
        need(t, "tracker");
        need(box, "box");
        const auto maps = gather(scales, n_scales);
        t->t.init(maps, {box->cx, box->cy, box->h, box->w});
        t->last.reset();
    });
}

spk_status spk_tracker_step(spk_tracker* t, const spk_features* const* scales, int n_scales, spk_box* box,
                            spk_diagnostics* diag)
{
    return guarded([&] {
        need(t, "tracker");
        const auto maps = gather(scales, n_scales);
        subpeak::StepResult r = t->t.step(maps);
        if (box) {
            *box = {r.box.cx, r.box.cy, r.box.h, r.box.w};
        }
        if (diag) {
            const auto& d = r.diagnostics;
            *diag = {d.frame,
                     d.peak.row,
                     d.peak.col,
                     d.peak_value,
                     d.subpeak_count,
                     d.loss_after_update ? 1 : 0,
                     d.loss_after_update.value_or(0.0)};
        }
        t->last = std::move(r.fused);
    });
}

spk_status spk_tracker_last_response(const spk_tracker* t, spk_grid** out)
{
    return emit_grid(
        [&] {
            need(t, "tracker");
            if (!t->last) {
                throw subpeak::StateError("no step has run since init");
            }
            return *t->last;
        },
        out);
}

spk_status spk_simulate(const char* scene_config_path, const char* out_dir)
{
    return guarded([&] {
        need(scene_config_path, "scene_config_path");
        need(out_dir, "out_dir");
        subpeak::simulate_to_directory(subpeak::load_scene_config(scene_config_path), out_dir);
    });
}

spk_status spk_track_directory(const char* scene_dir, const char* tracker_config_path, const char* out_csv,
                               const char* heatmap_dir)
{
    return guarded([&] {
        need(scene_dir, "scene_dir");
        need(out_csv, "out_csv");
        const subpeak::TrackerConfig cfg =
            tracker_config_path ? subpeak::load_tracker_config(tracker_config_path) : subpeak::TrackerConfig{};
        subpeak::track_directory(scene_dir, cfg, out_csv,
                                 heatmap_dir ? std::filesystem::path(heatmap_dir) : std::filesystem::path());
    });
}

spk_status spk_ablate(const char* run_config_path, const char* out_csv, const char* sequences_csv, int jobs)
{
    return guarded([&] {
        need(run_config_path, "run_config_path");
        need(out_csv, "out_csv");
        const auto result = subpeak::run_ablation(subpeak::load_run_config(run_config_path), jobs);
        subpeak::write_text(out_csv, result.report);
        if (sequences_csv) {
            subpeak::write_text(sequences_csv, result.sequences);
        }
    });
}

spk_status spk_eval_files(const char* run_csv, const char* gt_csv, const char* curves_csv, char** summary)
{
    return guarded([&] {
        need(run_csv, "run_csv");
        need(gt_csv, "gt_csv");
        need(summary, "summary");
        *summary = nullptr;
        const auto rows = subpeak::decode_run_csv(subpeak::read_text(run_csv));
        const auto gt = subpeak::decode_boxes_csv(subpeak::read_text(gt_csv));
        const auto result = subpeak::evaluate_rows(rows, gt);
        if (curves_csv) {
            subpeak::write_text(curves_csv, subpeak::eval_curves_csv(result));
        }
        *summary = dup_string(subpeak::eval_summary_csv(result));
    });
}

spk_status spk_bench(int map_size, int channels, int repeats, char** table)
{
    return guarded([&] {
        need(table, "table");
        *table = nullptr;
        if (map_size < 4 || channels < 1 || repeats < 1) {
            throw subpeak::ParameterError("bench needs map_size >= 4, channels >= 1, repeats >= 1");
        }
        *table = dup_string(subpeak::run_bench(map_size, channels, repeats));
    });
}

}  // extern "C"
