#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace epismc {

/// Work-efficient (Blelloch) prefix sums over a fixed balanced binary
/// combination tree. The serial and threaded paths execute the identical
/// operation schedule, so results are bit-identical for every worker count;
/// non-power-of-two lengths are padded with 0.0 internally and the padding
/// never reaches the output.
std::vector<double> inclusive_scan(std::span<const double> values, int workers = 1);

/// exclusive[0] = 0, exclusive[k] = inclusive[k-1].
std::vector<double> exclusive_scan(std::span<const double> values, int workers = 1);

/// Floating-point additions one sweep performs for this input (padding ops
/// excluded); bounded by 2n.
std::size_t scan_add_count(std::span<const double> values);

}  // namespace epismc
