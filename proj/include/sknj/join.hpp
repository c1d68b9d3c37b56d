#pragma once

// Block nested-loop KNN join driver.
//
// R is read in blocks of n_r pages. For each R block every candidate set
// starts empty (pruneScore 0), S is scanned in blocks of n_s pages, and the
// kernel joins each (R block, S block) pair. MinPruneScore is refreshed after
// every kernel call. Once S is exhausted the block's rows are emitted.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "sknj/candidate_set.hpp"
#include "sknj/counters.hpp"
#include "sknj/dataset.hpp"
#include "sknj/errors.hpp"
#include "sknj/kernels.hpp"

namespace sknj {

struct JoinConfig {
  std::size_t k = 5;
  std::size_t page_size = kDefaultPageSize;
  std::size_t buffer_pages = 2;
  double r_fraction = 0.8;
  Algorithm algorithm = Algorithm::iiib;
  ResidualCompletion residual = ResidualCompletion::postings;
  unsigned threads = 1;

  void validate() const {
    if (k < 1) throw UsageError("k must be >= 1");
    if (page_size < 1) throw UsageError("page size must be >= 1");
    if (buffer_pages < 2) throw UsageError("buffer needs at least 2 pages");
    if (!(r_fraction > 0.0 && r_fraction < 1.0)) throw UsageError("r_fraction must lie in (0, 1)");
    if (threads < 1) throw UsageError("threads must be >= 1");
  }

  /// Pages for R blocks: floor(r_fraction * buffer_pages), kept within
  /// [1, buffer_pages - 1] so both sides get at least one page.
  std::size_t r_pages() const {
    const auto n = static_cast<std::size_t>(std::floor(r_fraction * static_cast<double>(buffer_pages)));
    return std::clamp<std::size_t>(n, 1, buffer_pages - 1);
  }

  std::size_t s_pages() const { return buffer_pages - r_pages(); }
};

/// Called once per outer vector, in R file order, with its ranked neighbors.
using ResultSink = std::function<void(VectorId r_id, std::span<const Neighbor> neighbors)>;

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

using AnyKernel = std::variant<BruteForceKernel, InvertedIndexKernel, PrunedInvertedIndexKernel>;

inline AnyKernel make_kernel(const JoinConfig& config, Dimension dims) {
  switch (config.algorithm) {
    case Algorithm::bf: return BruteForceKernel{};
    case Algorithm::iib: return InvertedIndexKernel{};
    case Algorithm::iiib: return PrunedInvertedIndexKernel{dims, config.residual};
  }
  throw UsageError("unknown algorithm");
}

struct BlockRows {
  std::vector<std::pair<VectorId, std::vector<Neighbor>>> rows;
};

/// Joins one R block against all of S.
inline BlockRows join_r_block(const Block& r_block, const std::filesystem::path& s_path,
                              const JoinConfig& config, AnyKernel& kernel, CostCounters& counters) {
  JoinState state(r_block, config.k);
  {
    const Stopwatch cpu;
    std::visit([&](auto& kern) { kern.prepare(r_block); }, kernel);
    counters.cpu_seconds += cpu.seconds();
  }
  Stopwatch io;
  BlockReader s_reader(s_path, config.s_pages(), config.page_size);
  while (true) {
    std::optional<Block> s_block = s_reader.next();
    counters.io_seconds += io.seconds();
    if (!s_block) break;
    ++counters.s_blocks_read;
    const Stopwatch cpu;
    std::visit([&](auto& kern) { kern.join(r_block, *s_block, state, counters); }, kernel);
    refresh_min_prune_score(state);
    counters.cpu_seconds += cpu.seconds();
    io = Stopwatch{};
  }
  BlockRows out;
  out.rows.reserve(state.sets.size());
  for (const CandidateSet& set : state.sets) out.rows.emplace_back(set.owner(), set.ranked());
  return out;
}

}  // namespace detail

/// Runs the block nested-loop join and streams ranked rows to `sink`.
/// Returns the run's counters. With config.threads > 1, distinct R blocks are
/// joined concurrently (each worker owns its kernel and S scan); rows are
/// still emitted in R order and the timers sum over workers.
inline CostCounters block_nested_loops_join(const std::filesystem::path& r_path,
                                            const std::filesystem::path& s_path,
                                            const JoinConfig& config, const ResultSink& sink) {
  config.validate();
  const DatasetHeader r_header = read_header(r_path);
  const DatasetHeader s_header = read_header(s_path);
  if (r_header.dims != s_header.dims) {
    throw DataError("dimensionality mismatch: R has D = " + std::to_string(r_header.dims) +
                    ", S has D = " + std::to_string(s_header.dims));
  }
  const Dimension dims = r_header.dims;

  CostCounters total;
  BlockReader r_reader(r_path, config.r_pages(), config.page_size);

  const auto emit = [&](const detail::BlockRows& rows) {
    for (const auto& [id, neighbors] : rows.rows) sink(id, neighbors);
  };

  if (config.threads <= 1) {
    detail::AnyKernel kernel = detail::make_kernel(config, dims);
    while (true) {
      const detail::Stopwatch io;
      std::optional<Block> r_block = r_reader.next();
      total.io_seconds += io.seconds();
      if (!r_block) break;
      ++total.r_blocks_read;
      emit(detail::join_r_block(*r_block, s_path, config, kernel, total));
    }
    return total;
  }

  std::mutex mu;
  std::size_t next_index = 0;
  std::size_t next_emit = 0;
  std::map<std::size_t, detail::BlockRows> ready;
  std::exception_ptr failure;
  const auto worker = [&] {
    CostCounters local;
    detail::AnyKernel kernel = detail::make_kernel(config, dims);
    try {
      while (true) {
        std::optional<Block> r_block;
        std::size_t index = 0;
        {
          std::lock_guard lock(mu);
          if (failure) break;
          const detail::Stopwatch io;
          r_block = r_reader.next();
          local.io_seconds += io.seconds();
          if (!r_block) break;
          ++local.r_blocks_read;
          index = next_index++;
        }
        detail::BlockRows rows = detail::join_r_block(*r_block, s_path, config, kernel, local);
        std::lock_guard lock(mu);
        ready.emplace(index, std::move(rows));
        for (auto it = ready.find(next_emit); it != ready.end(); it = ready.find(next_emit)) {
          emit(it->second);
          ready.erase(it);
          ++next_emit;
        }
      }
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
    std::lock_guard lock(mu);
    total += local;
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < config.threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return total;
}

struct JoinOutput {
  std::vector<KnnRow> rows;
  CostCounters counters;
};

inline JoinOutput block_nested_loops_join(const std::filesystem::path& r_path,
                                          const std::filesystem::path& s_path,
                                          const JoinConfig& config) {
  JoinOutput out;
  out.counters = block_nested_loops_join(r_path, s_path, config,
                                         [&](VectorId id, std::span<const Neighbor> ns) {
                                           out.rows.push_back({id, {ns.begin(), ns.end()}});
                                         });
  return out;
}

/// `r_id <TAB> rank <TAB> s_id <TAB> score`, rank starting at 1, score with
/// 6 significant digits.
inline void write_tsv_rows(std::ostream& out, VectorId r_id, std::span<const Neighbor> neighbors) {
  char score[32];
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    std::snprintf(score, sizeof score, "%.6g", neighbors[i].score);
    out << r_id << '\t' << (i + 1) << '\t' << neighbors[i].id << '\t' << score << '\n';
  }
}

}  // namespace sknj
