// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

namespace mambattn::runtime {

/// Keeps large freed blocks in the heap instead of returning them to the
/// OS. Training allocates and drops multi-megabyte activations every step,
/// and fresh mmap pages cost a zero-fill each time. No-op outside glibc.
void tune_allocator();

}  // namespace mambattn::runtime
