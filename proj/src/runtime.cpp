#include "edgeface/runtime.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace edgeface {

RuntimeConfig RuntimeConfig::from_env() {
    RuntimeConfig cfg;
    const char* det = std::getenv("EDGEFACE_DETERMINISTIC");
    const char* thr = std::getenv("EDGEFACE_THREADS");
    if (det != nullptr && std::string(det) == "0") cfg.deterministic = false;
    if (thr != nullptr) {
        int n = std::atoi(thr);
        cfg.threads = std::max(1, n);
    }
    if (cfg.deterministic) cfg.threads = 1;
    return cfg;
}

const RuntimeConfig& RuntimeConfig::get() {
    static RuntimeConfig cfg = from_env();
    return cfg;
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
    const RuntimeConfig& cfg = RuntimeConfig::get();
    int workers = std::min<int64_t>(cfg.threads, n);
    if (workers <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int64_t lo = w * chunk;
        int64_t hi = std::min<int64_t>(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

namespace mac_tally {

namespace {
bool g_enabled = false;
uint64_t g_total = 0;
}  // namespace

bool enabled() { return g_enabled; }
void enable() { g_enabled = true; }
void disable() { g_enabled = false; }
void reset() { g_total = 0; }
uint64_t total() { return g_total; }
void add(uint64_t n) { g_total += n; }

}  // namespace mac_tally

}  // namespace edgeface
