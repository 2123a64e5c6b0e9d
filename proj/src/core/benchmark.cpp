#include "core/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "core/errors.hpp"

namespace subpeak {

std::vector<Variant> ablation_grid(const TrackerConfig& base)
{
    struct Flags {
        bool brt, prp, mf;
    };
    constexpr Flags rows[] = {{false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
                              {true, true, false},   {true, false, true},  {false, true, true},  {true, true, true}};
    std::vector<Variant> out;
    for (const auto& f : rows) {
        Variant v;
        v.tracker = base;
        v.tracker.brt_on = f.brt;
        v.tracker.prp_on = f.prp;
        v.tracker.multiscale_on = f.mf;
        v.name = f.brt || f.prp || f.mf ? std::string(f.brt ? "B" : "") + (f.prp ? "P" : "") + (f.mf ? "M" : "") : "baseline";
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<std::vector<FeatureMap>> render_all(const Sequence& seq)
{
    std::vector<std::vector<FeatureMap>> frames;
    frames.reserve(static_cast<std::size_t>(seq.frames()));
    for (int t = 0; t < seq.frames(); ++t) {
        frames.push_back(render_features(seq, t));
    }
    return frames;
}

SequenceRun track_with_resets(const TrackerConfig& cfg, const std::vector<std::vector<FeatureMap>>& frames,
                              std::span<const Box> gt)
{
    if (frames.size() != gt.size()) {
        throw DimensionError("frame count differs from ground truth count");
    }
    Tracker tracker(cfg);
    SequenceRun run;
    run.subpeaks.assign(gt.size(), 0);
    TrackerClosure closure;
    closure.init = [&](int frame, const Box& box) { tracker.init(frames[static_cast<std::size_t>(frame)], box); };
    closure.step = [&](int frame) {
        StepResult r = tracker.step(frames[static_cast<std::size_t>(frame)]);
        r.diagnostics.frame = frame;
        run.subpeaks[static_cast<std::size_t>(frame)] = r.diagnostics.subpeak_count;
        run.diagnostics.push_back(r.diagnostics);
        return r.box;
    };
    run.vot = run_vot(closure, gt);
    return run;
}

PlainRun track_plain(const TrackerConfig& cfg, const std::vector<std::vector<FeatureMap>>& frames, const Box& init_box,
                     const std::function<void(int frame, const Grid2D& fused)>& on_response)
{
    if (frames.empty()) {
        throw DimensionError("no frames to track");
    }
    Tracker tracker(cfg);
    tracker.init(frames.front(), init_box);
    PlainRun run;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        StepResult r = tracker.step(frames[t]);
        r.diagnostics.frame = static_cast<int>(t);
        if (on_response) {
            on_response(static_cast<int>(t), r.fused);
        }
        run.diagnostics.push_back(r.diagnostics);
    }
    return run;
}

namespace {

struct SequenceOutcome {
    std::vector<SequenceRun> runs;  // per variant
    std::vector<Box> gt;
};

SequenceOutcome run_sequence(const RunConfig& cfg, const std::vector<Variant>& variants, std::uint64_t seed)
{
    SceneConfig scene = cfg.scene;
    scene.seed = seed;
    const Sequence seq = gen_sequence(scene);
    const auto frames = render_all(seq);
    SequenceOutcome out;
    out.gt = ground_truth(seq);
    for (const auto& v : variants) {
        out.runs.push_back(track_with_resets(v.tracker, frames, out.gt));
    }
    return out;
}

std::string fmt(double v)
{
    return format_double(v);
}

}  // namespace

AblationReport compare_configs(const RunConfig& cfg, const std::vector<Variant>& variants, int jobs)
{
    cfg.validate();
    if (variants.size() < 2) {
        throw ParameterError("comparison needs at least two variants");
    }
    const auto n = static_cast<std::size_t>(cfg.repeats);
    std::vector<SequenceOutcome> outcomes(n);
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t i = 0; i < n; ++i) {
        seeds[i] = cfg.base_seed + i;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                outcomes[i] = run_sequence(cfg, variants, seeds[i]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(n);
                return;
            }
        }
    };
    const int threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    AblationReport report;
    report.seeds = seeds;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        VariantSummary summary;
        summary.variant = variants[v];
        std::vector<Box> pred;
        std::vector<Box> gt;
        std::vector<std::uint8_t> mask;
        std::vector<int> peaks;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& run = outcomes[i].runs[v];
            const auto& g = outcomes[i].gt;
            pred.insert(pred.end(), run.vot.boxes.begin(), run.vot.boxes.end());
            gt.insert(gt.end(), g.begin(), g.end());
            mask.insert(mask.end(), run.vot.evaluated.begin(), run.vot.evaluated.end());
            peaks.insert(peaks.end(), run.subpeaks.begin(), run.subpeaks.end());
            summary.total_failures += run.vot.failures;

            const EvalResult e = evaluate_run(run.vot.boxes, g, run.vot.evaluated, run.subpeaks, run.vot.failures);
            summary.sequences.push_back(
                {seeds[i], run.vot.failures, e.frames, e.mean_subpeaks, e.single_peak_fraction, e.mean_center_error});
        }
        summary.pooled = evaluate_run(pred, gt, mask, peaks, summary.total_failures);
        report.variants.push_back(std::move(summary));
    }
    const auto& base = report.variants.front().sequences;
    for (auto& s : report.variants) {
        for (std::size_t i = 0; i < n; ++i) {
            if (s.sequences[i].failures < base[i].failures) {
                ++s.better;
            } else if (s.sequences[i].failures > base[i].failures) {
                ++s.worse;
            }
        }
        s.sign_p = sign_test_p(s.better, s.worse);
    }
    return report;
}

std::string report_csv(const AblationReport& report)
{
    std::ostringstream out;
    out << "variant,brt,prp,mf,sequences,failures,frames,success_auc,precision_20px,mean_center_error,mean_subpeaks,"
           "single_peak_fraction,fewer_failures_than_baseline,more_failures_than_baseline,sign_test_p\n";
    for (const auto& v : report.variants) {
        const auto& t = v.variant.tracker;
        out << v.variant.name << "," << (t.brt_on ? 1 : 0) << "," << (t.prp_on ? 1 : 0) << "," << (t.multiscale_on ? 1 : 0)
            << "," << v.sequences.size() << "," << v.total_failures << "," << v.pooled.frames << ","
            << fmt(v.pooled.curves.success_auc) << "," << fmt(v.pooled.curves.precision[20].second) << ","
            << fmt(v.pooled.mean_center_error) << "," << fmt(v.pooled.mean_subpeaks) << ","
            << fmt(v.pooled.single_peak_fraction) << "," << v.better << "," << v.worse << "," << fmt(v.sign_p) << "\n";
    }
    return out.str();
}

std::string sequences_csv(const AblationReport& report)
{
    std::ostringstream out;
    out << "seed,variant,failures,frames,mean_subpeaks,single_peak_fraction,mean_center_error,delta_failures_vs_baseline\n";
    const auto& base = report.variants.front().sequences;
    for (std::size_t i = 0; i < report.seeds.size(); ++i) {
        for (const auto& v : report.variants) {
            const auto& s = v.sequences[i];
            out << s.seed << "," << v.variant.name << "," << s.failures << "," << s.frames << "," << fmt(s.mean_subpeaks)
                << "," << fmt(s.single_peak_fraction) << "," << fmt(s.mean_center_error) << ","
                << (s.failures - base[i].failures) << "\n";
        }
    }
    return out.str();
}

std::string diagnostics_csv_header()
{
    return "frame,peak_row,peak_col,peak_value,subpeak_count,cx,cy,h,w,loss\n";
}

std::string diagnostics_csv_row(const TrackDiagnostics& d)
{
    std::ostringstream out;
    out << d.frame << "," << d.peak.row << "," << d.peak.col << "," << fmt(d.peak_value) << "," << d.subpeak_count << ","
        << fmt(d.box.cx) << "," << fmt(d.box.cy) << "," << fmt(d.box.h) << "," << fmt(d.box.w) << ","
        << (d.loss_after_update ? fmt(*d.loss_after_update) : std::string()) << "\n";
    return out.str();
}

std::string diagnostics_csv(const std::vector<TrackDiagnostics>& diags)
{
    std::string out = diagnostics_csv_header();
    for (const auto& d : diags) {
        out += diagnostics_csv_row(d);
    }
    return out;
}

}  // namespace subpeak
