#pragma once

#include <cstdint>

namespace sknj {

// Instrumentation shared by the join driver and the kernels. Every field is
// monotone within a run; partial tallies from independent workers merge with +=.
struct CostCounters {
  // Merge-dot cost charged by the caller. Standalone dot() charges its true
  // iterator advances; the BF kernel charges the |r| + |s| budget per pair.
  std::uint64_t feature_visits = 0;
  // True iterator advances performed by merge dots.
  std::uint64_t feature_advances = 0;
  // Inverted-list insertions.
  std::uint64_t postings_built = 0;
  // Postings scanned while accumulating scores.
  std::uint64_t postings_visited = 0;
  // Work spent completing scores from unindexed (residual) features.
  std::uint64_t residual_visits = 0;
  std::uint64_t r_blocks_read = 0;
  std::uint64_t s_blocks_read = 0;
  // Wall-clock seconds spent in block reads and in kernel execution.
  double io_seconds = 0.0;
  double cpu_seconds = 0.0;

  CostCounters& operator+=(const CostCounters& o) {
    feature_visits += o.feature_visits;
    feature_advances += o.feature_advances;
    postings_built += o.postings_built;
    postings_visited += o.postings_visited;
    residual_visits += o.residual_visits;
    r_blocks_read += o.r_blocks_read;
    s_blocks_read += o.s_blocks_read;
    io_seconds += o.io_seconds;
    cpu_seconds += o.cpu_seconds;
    return *this;
  }
};

}  // namespace sknj
