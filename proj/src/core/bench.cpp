#include "core/bench.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "core/classifier.hpp"
#include "core/peak_ops.hpp"
#include "core/rng.hpp"

namespace subpeak {

namespace {

double time_ms(int repeats, const std::function<void()>& fn)
{
    fn();  // warm-up
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < repeats; ++i) {
        fn();
    }
    const auto end = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(end - start).count() / repeats;
}

}  // namespace

std::string run_bench(int map_size, int channels, int repeats)
{
    Rng rng(2024);
    FeatureMap x(channels, map_size, map_size);
    for (auto& g : x.grids()) {
        for (auto& v : g.values()) {
            v = static_cast<float>(rng.normal());
        }
    }
    const auto w = ClassifierWeights::random(channels, 8, 3, 3, 11);
    SampleMemory mem(30, 0.1);
    mem.insert({x, make_gaussian_label(map_size, map_size, map_size / 2.0, map_size / 2.0, 2.0), 0});
    const Grid2D response = predict(w, x);
    ObjectiveOptions plain;
    ObjectiveOptions rect;
    rect.rectified = true;

    struct Row {
        const char* name;
        double ms;
        double pixels;
    };
    const double px = static_cast<double>(map_size) * map_size;
    volatile double sink = 0.0;
    const Row rows[] = {
        {"conv2d_mc (C->8, 3x3)", time_ms(repeats, [&] { sink = conv2d_mc(x, w.w1).channel(0)[0]; }), px},
        {"predict", time_ms(repeats, [&] { sink = predict(w, x)[0]; }), px},
        {"prp", time_ms(repeats * 10, [&] { sink = prp(response)[0]; }), px},
        {"rectify", time_ms(repeats * 10, [&] { sink = rectify(response)[0]; }), px},
        {"brt (ratio 0.1)", time_ms(repeats * 10, [&] { sink = brt(response, {map_size / 2, map_size / 2}, 0.1)[0]; }), px},
        {"find_subpeaks", time_ms(repeats * 10, [&] { sink = static_cast<double>(find_subpeaks(response, 0.5).size()); }), px},
        {"loss+gradient", time_ms(repeats, [&] { sink = gradient(w, mem, plain)[0]; }), px},
        {"loss+gradient rectified", time_ms(repeats, [&] { sink = gradient(w, mem, rect)[0]; }), px},
    };
    (void)sink;

    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "# map %dx%d, %d channels\n%-26s %12s %14s\n", map_size, map_size, channels,
                  "kernel", "ms/call", "Mpixel/s");
    out << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%-26s %12.4f %14.2f\n", r.name, r.ms, r.pixels / (r.ms * 1e3));
        out << line;
    }
    return out.str();
}

}  // namespace subpeak
