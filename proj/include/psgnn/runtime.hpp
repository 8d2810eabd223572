#pragma once

namespace psgnn {

/// Keeps large tensor buffers in the heap instead of returning them to the OS
/// after every step. Training allocates and frees many multi-megabyte buffers
/// per sample, and the default glibc thresholds turn each one into an mmap.
void tune_allocator();

}  // namespace psgnn
