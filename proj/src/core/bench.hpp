#pragma once

#include <string>

namespace subpeak {

// Kernel throughput table (timings, so not byte-reproducible).
std::string run_bench(int map_size = 64, int channels = 8, int repeats = 20);

}  // namespace subpeak
