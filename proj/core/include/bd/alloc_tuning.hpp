#pragma once

#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace bd {

/// Training churns through multi-megabyte scratch buffers (im2col panels,
/// adjoints) every step. glibc serves those via mmap and returns them to the
/// kernel on free, so each step pays the page faults again. Raising the
/// thresholds keeps the blocks on the heap for reuse.
inline void tune_allocator_for_training() {
#if defined(__GLIBC__)
    static std::once_flag once;
    std::call_once(once, [] {
        mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    });
#endif
}

}  // namespace bd
