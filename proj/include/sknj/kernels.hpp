#pragma once

// In-memory join kernels for one (outer block, inner block) pair.
//
//   BruteForceKernel           scores every pair with a merge dot product.
//   InvertedIndexKernel        indexes every inner feature and accumulates
//                              scores term-at-a-time per outer vector.
//   PrunedInvertedIndexKernel  indexes an inner feature only once an upper
//                              bound on the vector's score against the outer
//                              block exceeds the block's MinPruneScore; the
//                              unindexed prefix is added back for every
//                              accumulated candidate.
//
// All kernels share the driver's admission rule: a candidate enters r's set
// only when its exact score is strictly greater than pruneScore(r).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sknj/block_merge.hpp"
#include "sknj/candidate_set.hpp"
#include "sknj/counters.hpp"
#include "sknj/dataset.hpp"
#include "sknj/errors.hpp"
#include "sknj/inverted_lists.hpp"
#include "sknj/sparse_vector.hpp"

namespace sknj {

enum class Algorithm { bf, iib, iiib };

inline std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::bf: return "bf";
    case Algorithm::iib: return "iib";
    case Algorithm::iiib: return "iiib";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view name) {
  if (name == "bf") return Algorithm::bf;
  if (name == "iib") return Algorithm::iib;
  if (name == "iiib") return Algorithm::iiib;
  throw UsageError("unknown algorithm '" + std::string(name) + "' (expected bf, iib or iiib)");
}

// ---------------------------------------------------------------------------
// Brute force

/// Scores every (r, s) pair with a merge dot product. The counters charge the
/// full iterator budget |r| + |s| per pair to feature_visits and the merge's
/// true advances to feature_advances.
class BruteForceKernel {
 public:
  void prepare(const Block& r_block) { r_rows_.assign(r_block, kOuterPad); }

  void join(const Block& r_block, const Block& s_block, JoinState& state, CostCounters& counters) {
    s_rows_.assign(s_block, kInnerPad);
    scores_.resize(s_block.size());
    advances_.resize(s_block.size());
    std::uint64_t s_features = 0;
    for (const SparseVector& s : s_block.vectors) s_features += s.size();
    for (std::size_t i = 0; i < r_block.size(); ++i) {
      const SparseVector& r = r_block.vectors[i];
      CandidateSet& set = state.sets[i];
      block_merge_row(r_rows_, i, s_rows_, scores_.data(), advances_.data());
      for (std::size_t j = 0; j < s_block.size(); ++j) {
        if (scores_[j] > set.prune_score()) set.insert(s_block.vectors[j].id, scores_[j]);
        counters.feature_advances += advances_[j];
      }
      counters.feature_visits += r.size() * s_block.size() + s_features;
    }
  }

 private:
  PaddedBlock r_rows_;
  PaddedBlock s_rows_;
  std::vector<double> scores_;
  std::vector<std::uint64_t> advances_;
};

// ---------------------------------------------------------------------------
// Inverted index

inline InvertedLists build_inverted_lists_iib(const Block& s_block, CostCounters& counters) {
  InvertedLists lists;
  lists.build(s_block, [](std::size_t, std::size_t) { return true; });
  counters.postings_built += lists.total_postings();
  return lists;
}

/// Adds r[d] * w to acc for every posting in every list r touches.
template <typename Lists>
void accumulate(const SparseVector& r, const Lists& lists, Accumulator& acc, CostCounters& counters) {
  std::uint64_t visited = 0;
  for (const Feature& f : r.features) {
    const auto postings = lists.list(f.d);
    visited += postings.size();
    const double rw = f.w;
    for (const Posting& p : postings) acc.add(p.ref, rw * static_cast<double>(p.w));
  }
  counters.postings_visited += visited;
}

/// Offers every accumulated candidate to `set` and clears the accumulator.
inline void admit(Accumulator& acc, const Block& s_block, CandidateSet& set) {
  for (std::uint32_t ref : acc.touched()) {
    const double score = acc[ref];
    if (score > set.prune_score()) set.insert(s_block.vectors[ref].id, score);
  }
  acc.clear();
}

inline void find_matches_iib(const SparseVector& r, CandidateSet& set, const Block& s_block,
                             const InvertedLists& lists, Accumulator& acc, CostCounters& counters) {
  accumulate(r, lists, acc, counters);
  admit(acc, s_block, set);
}

class InvertedIndexKernel {
 public:
  void prepare(const Block&) {}

  void join(const Block& r_block, const Block& s_block, JoinState& state, CostCounters& counters) {
    lists_.build(s_block, [](std::size_t, std::size_t) { return true; });
    counters.postings_built += lists_.total_postings();
    acc_.reset(s_block.size());
    for (std::size_t i = 0; i < r_block.size(); ++i) {
      find_matches_iib(r_block.vectors[i], state.sets[i], s_block, lists_, acc_, counters);
    }
  }

  const InvertedLists& lists() const noexcept { return lists_; }

 private:
  InvertedLists lists_;
  Accumulator acc_;
};

// ---------------------------------------------------------------------------
// Threshold-pruned inverted index

/// Statistics of the outer block that drive index pruning.
struct FrequencyProfile {
  std::vector<std::uint32_t> counts;  // non-zero entries per dimension
  std::vector<float> max_weight;      // maxWeight_d; 0 where absent
  std::vector<Dimension> order;       // count desc, then dimension asc
  std::vector<std::uint32_t> rank;    // inverse of order

  static FrequencyProfile of(const Block& r_block, Dimension dims) {
    FrequencyProfile p;
    p.counts.assign(dims, 0);
    p.max_weight.assign(dims, 0.0f);
    for (const SparseVector& r : r_block.vectors) {
      for (const Feature& f : r.features) {
        ++p.counts[f.d];
        p.max_weight[f.d] = std::max(p.max_weight[f.d], f.w);
      }
    }
    p.order.resize(dims);
    for (Dimension d = 0; d < dims; ++d) p.order[d] = d;
    std::sort(p.order.begin(), p.order.end(), [&](Dimension a, Dimension b) {
      return p.counts[a] != p.counts[b] ? p.counts[a] > p.counts[b] : a < b;
    });
    p.rank.resize(dims);
    for (std::uint32_t i = 0; i < dims; ++i) p.rank[p.order[i]] = i;
    return p;
  }

  Dimension dims() const noexcept { return static_cast<Dimension>(counts.size()); }
};

/// An inner vector with each feature flagged as indexed or residual.
struct SplitVector {
  const SparseVector* vector = nullptr;
  std::span<const std::uint8_t> indexed;  // parallel to vector->features

  template <typename F>
  void for_each_residual(F&& f) const {
    for (std::size_t j = 0; j < indexed.size(); ++j) {
      if (!indexed[j]) f(vector->features[j]);
    }
  }
};

/// How the residual (unindexed) part of each accumulated candidate is scored.
enum class ResidualCompletion {
  // Per-dimension postings over residual features, probed once per outer
  // vector; contributions reach only candidates already in the accumulator.
  postings,
  // Merge dot of r against each accumulated candidate's residual features.
  merge,
};

/// Output of the pruned index build: postings for indexed features, postings
/// for residual features, and the per-feature split flags.
struct PrunedIndex {
  SplitLists lists;  // indexed postings head each list, residual ones follow
  std::vector<std::uint8_t> flags;
  std::vector<std::size_t> offsets;  // flags of vector i start at offsets[i]
  std::vector<std::uint32_t> trigger;  // per vector: profile position of the first indexed feature
  double min_prune_score = 0.0;

  SplitLists::View indexed() const noexcept { return {lists, true}; }
  SplitLists::View residual() const noexcept { return {lists, false}; }

  SplitVector split(const Block& s_block, std::size_t i) const {
    return {&s_block.vectors[i],
            std::span<const std::uint8_t>(flags.data() + offsets[i], offsets[i + 1] - offsets[i])};
  }
};

/// Indexes the features of every inner vector in profile order, adding
/// maxWeight_d * w to a running bound t; the first feature that lifts t
/// strictly above min_prune and every feature after it are indexed. The
/// features visited before that stay residual, so their bound is <= min_prune.
inline void build_inverted_lists_iiib(const Block& s_block, const FrequencyProfile& profile,
                                      double min_prune, CostCounters& counters, PrunedIndex& out,
                                      std::vector<std::uint32_t>& ranks) {
  constexpr std::uint32_t kNever = std::numeric_limits<std::uint32_t>::max();
  out.min_prune_score = min_prune;

  out.offsets.resize(s_block.size() + 1);
  out.offsets[0] = 0;
  for (std::size_t i = 0; i < s_block.size(); ++i) {
    out.offsets[i + 1] = out.offsets[i] + s_block.vectors[i].size();
  }
  out.flags.resize(out.offsets.back());

  // trigger[i]: profile position of the feature that lifted t_i above
  // min_prune. Features are taken in profile order, so the bound is summed in
  // exactly that order. Few steps are needed since the bound usually crosses
  // early.
  std::vector<std::uint32_t>& trigger = out.trigger;
  trigger.assign(s_block.size(), kNever);
  for (std::size_t i = 0; i < s_block.size(); ++i) {
    const auto& fs = s_block.vectors[i].features;
    ranks.resize(fs.size());
    for (std::size_t j = 0; j < fs.size(); ++j) ranks[j] = profile.rank[fs[j].d];
    double t = 0.0;
    // Ranks within a vector are distinct: each step takes the smallest rank
    // above the previous one.
    std::uint64_t above = 0;
    for (std::size_t step = 0; step < fs.size(); ++step) {
      std::uint64_t best = kNever;
      std::size_t at = 0;
      for (std::size_t j = 0; j < fs.size(); ++j) {
        const bool better = ranks[j] >= above && ranks[j] < best;
        best = better ? ranks[j] : best;
        at = better ? j : at;
      }
      const auto pos = static_cast<std::uint32_t>(best);
      const Dimension d = profile.order[pos];
      // Dimensions absent from B_r come last and add nothing to any bound.
      if (profile.counts[d] == 0) break;
      t += static_cast<double>(profile.max_weight[d]) * static_cast<double>(fs[at].w);
      if (t > min_prune) {
        trigger[i] = pos;
        break;
      }
      above = best + 1;
    }
    std::uint8_t* flags = out.flags.data() + out.offsets[i];
    for (std::size_t j = 0; j < fs.size(); ++j) flags[j] = ranks[j] >= trigger[i];
  }

  out.lists.build(s_block, [&](std::size_t i, std::size_t j) { return out.flags[out.offsets[i] + j] != 0; });
  counters.postings_built += out.indexed().total_postings();
}

inline void build_inverted_lists_iiib(const Block& s_block, const FrequencyProfile& profile,
                                      double min_prune, CostCounters& counters, PrunedIndex& out) {
  std::vector<std::uint32_t> ranks;
  build_inverted_lists_iiib(s_block, profile, min_prune, counters, out, ranks);
}

inline PrunedIndex build_inverted_lists_iiib(const Block& s_block, const FrequencyProfile& profile,
                                             double min_prune, CostCounters& counters) {
  PrunedIndex out;
  build_inverted_lists_iiib(s_block, profile, min_prune, counters, out);
  return out;
}

/// Merge dot of r against the residual features of s (ascending d), with
/// terms added one by one onto `init`.
inline MergeDot residual_merge_dot(std::span<const Feature> r, const SplitVector& s, double init = 0.0) noexcept {
  const auto& fs = s.vector->features;
  const std::size_t nr = r.size();
  const std::size_t ns = fs.size();
  MergeDot out;
  out.score = init;
  std::size_t i = 0;
  std::size_t j = 0;
  const auto skip_indexed = [&] {
    while (j < ns && s.indexed[j]) ++j;
  };
  skip_indexed();
  while (i < nr && j < ns) {
    const Dimension dr = r[i].d;
    const Dimension ds = fs[j].d;
    if (dr == ds) out.score += static_cast<double>(r[i].w) * static_cast<double>(fs[j].w);
    if (dr <= ds) {
      ++i;
      ++out.advances;
    }
    if (ds <= dr) {
      ++j;
      ++out.advances;
      skip_indexed();
    }
  }
  return out;
}

/// Scratch buffers reused across outer vectors.
struct PrunedScratch {
  Accumulator acc;
  std::vector<std::pair<std::span<const Posting>, double>> pending;  // residual lists r touches
};

/// Phase 1 accumulates over indexed postings. Phase 2 adds, for every
/// accumulated candidate, the dot product of r with its residual features.
/// Candidates that share no indexed dimension with r are never scored.
inline void find_matches_iiib(const SparseVector& r, CandidateSet& set, const Block& s_block,
                              const PrunedIndex& index, PrunedScratch& scratch,
                              ResidualCompletion mode, CostCounters& counters) {
  Accumulator& acc = scratch.acc;
  if (mode == ResidualCompletion::merge) {
    accumulate(r, index.indexed(), acc, counters);
    for (std::uint32_t ref : acc.touched()) {
      const MergeDot m = residual_merge_dot(r.features, index.split(s_block, ref), acc[ref]);
      counters.residual_visits += m.advances;
      acc[ref] = m.score;
    }
  } else {
    // Phase 1 notes the non-empty residual lists it passes so phase 2 visits
    // only those, in the same ascending-d order.
    auto& pending = scratch.pending;
    pending.clear();
    std::uint64_t visited = 0;
    std::uint64_t residual = 0;
    for (const Feature& f : r.features) {
      const auto head = index.lists.head(f.d);
      const auto tail = index.lists.tail(f.d);
      visited += head.size();
      const double rw = f.w;
      for (const Posting& p : head) acc.add(p.ref, rw * static_cast<double>(p.w));
      if (!tail.empty()) pending.emplace_back(tail, rw);
    }
    for (const auto& [tail, rw] : pending) {
      residual += tail.size();
      for (const Posting& p : tail) acc.add_if_live(p.ref, rw * static_cast<double>(p.w));
    }
    counters.postings_visited += visited;
    counters.residual_visits += residual;
  }
  admit(acc, s_block, set);
}

class PrunedInvertedIndexKernel {
 public:
  explicit PrunedInvertedIndexKernel(Dimension dims,
                                     ResidualCompletion mode = ResidualCompletion::postings)
      : dims_(dims), mode_(mode) {}

  /// Profiles the outer block once; reused for every inner block.
  void prepare(const Block& r_block) { profile_ = FrequencyProfile::of(r_block, dims_); }

  void join(const Block& r_block, const Block& s_block, JoinState& state, CostCounters& counters) {
    build_inverted_lists_iiib(s_block, profile_, state.min_prune_score, counters, index_, ranks_);
    scratch_.acc.reset(s_block.size());
    for (std::size_t i = 0; i < r_block.size(); ++i) {
      find_matches_iiib(r_block.vectors[i], state.sets[i], s_block, index_, scratch_, mode_, counters);
    }
  }

  const FrequencyProfile& profile() const noexcept { return profile_; }
  const PrunedIndex& index() const noexcept { return index_; }

 private:
  Dimension dims_;
  ResidualCompletion mode_;
  FrequencyProfile profile_;
  PrunedIndex index_;
  std::vector<std::uint32_t> ranks_;
  PrunedScratch scratch_;
};

}  // namespace sknj
