#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "sknj/dataset.hpp"
#include "sknj/sparse_vector.hpp"

namespace sknj {

struct Neighbor {
  VectorId id = 0;
  double score = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// One output row of a KNN join: an outer vector and its ranked neighbors
/// (score desc, id asc).
struct KnnRow {
  VectorId r_id = 0;
  std::vector<Neighbor> neighbors;
};

/// Bounded top-k set for one outer vector.
///
/// Entries are kept in descending score order; among equal scores the earlier
/// insertion comes first, so evicting the tail keeps earlier-scanned vectors.
/// prune_score() is the k-th best score once the set is full and 0 before.
class CandidateSet {
 public:
  CandidateSet() = default;
  CandidateSet(VectorId owner, std::size_t capacity) : owner_(owner), capacity_(capacity) {
    entries_.reserve(capacity);
  }

  VectorId owner() const noexcept { return owner_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool full() const noexcept { return entries_.size() == capacity_; }
  std::span<const Neighbor> entries() const noexcept { return entries_; }

  double prune_score() const noexcept { return full() ? entries_.back().score : 0.0; }

  /// Admits (id, score) iff score > prune_score(). Returns whether it was admitted.
  bool insert(VectorId id, double score) {
    if (!(score > prune_score()) || capacity_ == 0) return false;
    if (full()) entries_.pop_back();
    const auto pos = std::upper_bound(
        entries_.begin(), entries_.end(), score,
        [](double value, const Neighbor& n) { return value > n.score; });
    entries_.insert(pos, Neighbor{id, score});
    return true;
  }

  /// Entries ordered by (score desc, id asc) for emission.
  std::vector<Neighbor> ranked() const {
    std::vector<Neighbor> out(entries_.begin(), entries_.end());
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    return out;
  }

 private:
  VectorId owner_ = 0;
  std::size_t capacity_ = 0;
  std::vector<Neighbor> entries_;
};

/// Per-R-block join state: one candidate set per outer vector (aligned with
/// the block's vector order) plus the block-wide pruning threshold.
struct JoinState {
  std::vector<CandidateSet> sets;
  double min_prune_score = 0.0;

  JoinState() = default;
  JoinState(const Block& r_block, std::size_t k) {
    sets.reserve(r_block.size());
    for (const SparseVector& r : r_block.vectors) sets.emplace_back(r.id, k);
  }
};

/// Recomputes MinPruneScore as the minimum pruneScore over the block. An
/// under-full set has pruneScore 0, so the result is 0 until every set is full.
inline double refresh_min_prune_score(JoinState& state) {
  double m = state.sets.empty() ? 0.0 : state.sets.front().prune_score();
  for (const CandidateSet& c : state.sets) m = std::min(m, c.prune_score());
  state.min_prune_score = m;
  return m;
}

}  // namespace sknj
