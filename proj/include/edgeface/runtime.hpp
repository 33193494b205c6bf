#pragma once

#include <cstdint>
#include <functional>

namespace edgeface {

// Execution knobs, read once from the environment:
//   EDGEFACE_DETERMINISTIC=1  forces single-threaded fixed-order reductions
//   EDGEFACE_THREADS=N        worker cap when nondeterministic parallelism is allowed
struct RuntimeConfig {
    bool deterministic = true;
    int threads = 1;

    static const RuntimeConfig& get();       // cached process-wide view
    static RuntimeConfig from_env();
};

// Splits [0, n) across workers. Runs inline when a single worker is effective.
// Every sub-range is computed with the same fixed-order inner loops, so results
// do not depend on the split.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body);

// Multiply-accumulate tally for instrumented runs. Kernels report the MACs they
// actually perform while a tally is enabled. Single-threaded use only.
namespace mac_tally {
bool enabled();
void enable();
void disable();
void reset();
uint64_t total();
void add(uint64_t n);
}  // namespace mac_tally

}  // namespace edgeface
