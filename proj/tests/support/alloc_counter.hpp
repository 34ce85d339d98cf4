#pragma once

// Peak live heap bytes between start() and stop(). The executable must be
// linked with -Wl,--wrap=malloc -Wl,--wrap=free, and this header included by
// exactly one translation unit.

#include <malloc.h>

#include <atomic>
#include <cstddef>
#include <cstdlib>

namespace mvgc::test::alloc {

inline std::atomic<bool> counting{false};
inline std::atomic<long long> live{0};
inline std::atomic<long long> peak{0};
inline std::atomic<long long> calls{0};

inline void start() {
    live = 0;
    peak = 0;
    calls = 0;
    counting = true;
}

inline void stop() { counting = false; }

}  // namespace mvgc::test::alloc

extern "C" {
void* __real_malloc(std::size_t);
void __real_free(void*);

void* __wrap_malloc(std::size_t size) {
    void* p = __real_malloc(size);
    namespace a = mvgc::test::alloc;
    if (p != nullptr && a::counting.load(std::memory_order_relaxed)) {
        const auto now = a::live += static_cast<long long>(malloc_usable_size(p));
        ++a::calls;
        long long prev = a::peak.load();
        while (now > prev && !a::peak.compare_exchange_weak(prev, now)) {
        }
    }
    return p;
}

void __wrap_free(void* p) {
    namespace a = mvgc::test::alloc;
    if (p != nullptr && a::counting.load(std::memory_order_relaxed)) {
        a::live -= static_cast<long long>(malloc_usable_size(p));
    }
    __real_free(p);
}
}
