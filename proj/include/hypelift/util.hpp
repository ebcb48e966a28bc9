#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace hypelift {

/// 64-bit FNV-1a; used for config hashes and for turning string ids into RNG
/// stream keys, both of which must be stable across platforms.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Worker count: HYPELIFT_THREADS if set (>= 1), else hardware concurrency.
unsigned thread_budget();

/// Runs body(begin, end) over contiguous chunks of [0, n). The partition
/// depends only on n and the thread budget, and chunks never share output,
/// so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace hypelift
