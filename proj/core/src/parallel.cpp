#include "cellmetry/parallel.hpp"

#include <atomic>

namespace cellmetry {
namespace {

std::atomic<unsigned> configured_threads{0};

}  // namespace

void set_thread_count(unsigned count) { configured_threads = count; }

unsigned thread_count() {
    const unsigned n = configured_threads.load();
    if (n != 0) return n;
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace cellmetry
