#pragma once

namespace impugan {

// Keeps large matrix buffers on the heap instead of fresh mmap regions, which
// otherwise dominate system time during training. No-op outside glibc.
// Intended for executables; call once at startup.
void tune_allocator();

}  // namespace impugan
