#pragma once

#if defined(__GLIBC__) || defined(__linux__)
#include <malloc.h>
#endif

namespace cpcseq {

// Training churns through short-lived multi-megabyte matrices; keeping them
// on the heap instead of per-allocation mmap roughly halves step time.
// Call once from main() of long-running binaries.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
}

}  // namespace cpcseq
