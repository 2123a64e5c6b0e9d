#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "subpeak/subpeak.h"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int report(spk_status s)
{
    if (s == SPK_OK) {
        return 0;
    }
    std::fprintf(stderr, "subpeak: %s\n", spk_last_error());
    switch (s) {
    case SPK_ERR_CONFIG:
        return kExitConfig;
    case SPK_ERR_IO:
        return kExitIo;
    default:
        return kExitOther;
    }
}

const char* opt(const std::string& s)
{
    return s.empty() ? nullptr : s.c_str();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sub-peak suppression tracking engine"};
    app.require_subcommand(1);

    std::string scene_cfg, sim_out;
    auto* simulate = app.add_subcommand("simulate", "Render a synthetic sequence to a scene directory");
    simulate->add_option("--config", scene_cfg, "scene config file")->required();
    simulate->add_option("--out", sim_out, "output directory")->required();

    std::string scene_dir, tracker_cfg, run_out, heatmaps;
    auto* track = app.add_subcommand("track", "Track a scene directory and write per-frame diagnostics");
    track->add_option("--scene", scene_dir, "scene directory")->required();
    track->add_option("--tracker", tracker_cfg, "tracker config file (defaults when omitted)");
    track->add_option("--out", run_out, "diagnostics CSV")->required();
    track->add_option("--heatmaps", heatmaps, "directory for per-frame response heatmaps");

    std::string run_cfg, report_out, sequences_out;
    int jobs = 1;
    auto* ablate = app.add_subcommand("ablate", "Run the BRT/PRP/MF ablation grid");
    ablate->add_option("--config", run_cfg, "run config file")->required();
    ablate->add_option("--out", report_out, "per-variant report CSV")->required();
    ablate->add_option("--sequences", sequences_out, "per-sequence breakdown CSV");
    ablate->add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 256));

    std::string eval_run, eval_gt, curves_out;
    auto* eval = app.add_subcommand("eval", "Score a diagnostics CSV against ground truth");
    eval->add_option("--run", eval_run, "diagnostics CSV")->required();
    eval->add_option("--gt", eval_gt, "ground truth CSV")->required();
    eval->add_option("--curves", curves_out, "precision/success curves CSV");

    int bench_size = 64, bench_channels = 8, bench_repeats = 20;
    auto* bench = app.add_subcommand("bench", "Kernel throughput table");
    bench->add_option("--size", bench_size, "map side length")->check(CLI::Range(4, 1024));
    bench->add_option("--channels", bench_channels, "feature channels")->check(CLI::Range(1, 256));
    bench->add_option("--repeats", bench_repeats, "timing repeats")->check(CLI::Range(1, 100000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (*simulate) {
        return report(spk_simulate(scene_cfg.c_str(), sim_out.c_str()));
    }
    if (*track) {
        return report(spk_track_directory(scene_dir.c_str(), opt(tracker_cfg), run_out.c_str(), opt(heatmaps)));
    }
    if (*ablate) {
        return report(spk_ablate(run_cfg.c_str(), report_out.c_str(), opt(sequences_out), jobs));
    }
    if (*eval) {
        char* summary = nullptr;
        const spk_status s = spk_eval_files(eval_run.c_str(), eval_gt.c_str(), opt(curves_out), &summary);
        if (s == SPK_OK) {
            std::fputs(summary, stdout);
        }
        spk_string_free(summary);
        return report(s);
    }
    char* table = nullptr;
    const spk_status s = spk_bench(bench_size, bench_channels, bench_repeats, &table);
    if (s == SPK_OK) {
        std::fputs(table, stdout);
    }
    spk_string_free(table);
    return report(s);
}
