#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sknj/dataset.hpp"
#include "sknj/sparse_vector.hpp"

namespace sknj {

/// (position of the inner vector within its block, weight at this dimension)
struct Posting {
  std::uint32_t ref = 0;
  float w = 0.0f;

  friend bool operator==(const Posting&, const Posting&) = default;
};

/// Per-dimension postings over one inner block, stored as one contiguous
/// array with per-dimension offsets. Within a list, postings follow block
/// scan order.
class InvertedLists {
 public:
  std::span<const Posting> list(Dimension d) const noexcept {
    if (static_cast<std::size_t>(d) + 1 >= offsets_.size()) return {};
    return {postings_.data() + offsets_[d], postings_.data() + offsets_[d + 1]};
  }

  std::size_t total_postings() const noexcept { return postings_.size(); }
  std::size_t list_count() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  /// Rebuilds from `block`, keeping feature j of vector i iff keep(i, j).
  template <typename Keep>
  void build(const Block& block, Keep&& keep) {
    Dimension span_dims = 0;
    for (const SparseVector& s : block.vectors) {
      if (!s.features.empty()) span_dims = std::max(span_dims, s.features.back().d + 1);
    }
    offsets_.assign(static_cast<std::size_t>(span_dims) + 1, 0);
    for (std::size_t i = 0; i < block.vectors.size(); ++i) {
      const auto& fs = block.vectors[i].features;
      for (std::size_t j = 0; j < fs.size(); ++j) {
        if (keep(i, j)) ++offsets_[fs[j].d + 1];
      }
    }
    for (std::size_t d = 1; d < offsets_.size(); ++d) offsets_[d] += offsets_[d - 1];
    postings_.resize(offsets_.back());
    cursor_.assign(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t i = 0; i < block.vectors.size(); ++i) {
      const auto& fs = block.vectors[i].features;
      for (std::size_t j = 0; j < fs.size(); ++j) {
        if (keep(i, j)) postings_[cursor_[fs[j].d]++] = Posting{static_cast<std::uint32_t>(i), fs[j].w};
      }
    }
  }

  void clear() noexcept {
    offsets_.clear();
    postings_.clear();
  }

 private:
  std::vector<std::uint32_t> offsets_;
  std::vector<Posting> postings_;
  std::vector<std::uint32_t> cursor_;
};

/// Inverted lists split in two parts per dimension, stored in one array:
/// list d holds its head postings first and its tail postings after them.
/// Within each part, postings follow block scan order.
class SplitLists {
 public:
  /// One part of the split, with the list interface of InvertedLists.
  class View {
   public:
    View(const SplitLists& lists, bool head) noexcept : lists_(&lists), head_(head) {}
    std::span<const Posting> list(Dimension d) const noexcept {
      return head_ ? lists_->head(d) : lists_->tail(d);
    }
    std::size_t total_postings() const noexcept {
      return head_ ? lists_->head_total_ : lists_->postings_.size() - lists_->head_total_;
    }

   private:
    const SplitLists* lists_;
    bool head_;
  };

  std::span<const Posting> head(Dimension d) const noexcept {
    if (static_cast<std::size_t>(d) + 1 >= bounds_.size()) return {};
    return {postings_.data() + bounds_[d].begin, postings_.data() + bounds_[d].mid};
  }
  std::span<const Posting> tail(Dimension d) const noexcept {
    if (static_cast<std::size_t>(d) + 1 >= bounds_.size()) return {};
    return {postings_.data() + bounds_[d].mid, postings_.data() + bounds_[d + 1].begin};
  }

  /// Rebuilds from `block`: feature j of vector i goes to the head of its
  /// list iff in_head(i, j), otherwise to the tail.
  template <typename InHead>
  void build(const Block& block, InHead&& in_head) {
    Dimension span_dims = 0;
    for (const SparseVector& s : block.vectors) {
      if (!s.features.empty()) span_dims = std::max(span_dims, s.features.back().d + 1);
    }
    const std::size_t lists = span_dims;
    // Counts first: begin holds the list length, mid the head length.
    bounds_.assign(lists + 1, Bounds{});
    head_total_ = 0;
    for (std::size_t i = 0; i < block.vectors.size(); ++i) {
      const auto& fs = block.vectors[i].features;
      for (std::size_t j = 0; j < fs.size(); ++j) {
        const bool h = in_head(i, j);
        ++bounds_[fs[j].d].begin;
        bounds_[fs[j].d].mid += h;
        head_total_ += h;
      }
    }
    std::uint32_t at = 0;
    for (Bounds& b : bounds_) {
      const std::uint32_t len = b.begin;
      b.begin = at;
      b.mid += at;
      at += len;
    }
    postings_.resize(at);
    cursors_.resize(lists);
    for (std::size_t d = 0; d < lists; ++d) cursors_[d] = {bounds_[d].begin, bounds_[d].mid};
    for (std::size_t i = 0; i < block.vectors.size(); ++i) {
      const auto& fs = block.vectors[i].features;
      for (std::size_t j = 0; j < fs.size(); ++j) {
        Bounds& c = cursors_[fs[j].d];
        std::uint32_t& slot = in_head(i, j) ? c.begin : c.mid;
        postings_[slot++] = Posting{static_cast<std::uint32_t>(i), fs[j].w};
      }
    }
  }

 private:
  // List d: head [begin, mid), tail [mid, next list's begin).
  struct Bounds {
    std::uint32_t begin = 0;
    std::uint32_t mid = 0;
  };

  std::vector<Bounds> bounds_;
  std::vector<Posting> postings_;
  std::vector<Bounds> cursors_;
  std::size_t head_total_ = 0;
};

/// Dense score accumulator over one inner block. A slot is live once it has
/// received a positive contribution; touched() lists live slots in first-touch
/// order.
class Accumulator {
 public:
  void reset(std::size_t slots) {
    score_.assign(slots, 0.0);
    touched_.resize(slots + 1);
    live_ = 0;
  }

  // The first-touch test is branch-free: the ref is always written to the
  // next touched slot and kept only if the score was still 0.
  void add(std::uint32_t ref, double v) noexcept {
    double& slot = score_[ref];
    touched_[live_] = ref;
    live_ += slot == 0.0;
    slot += v;
  }

  // Adds v only to a slot that is already live; never changes liveness.
  void add_if_live(std::uint32_t ref, double v) noexcept {
    double& slot = score_[ref];
    slot += slot != 0.0 ? v : 0.0;
  }

  bool contains(std::uint32_t ref) const noexcept { return score_[ref] != 0.0; }
  double operator[](std::uint32_t ref) const noexcept { return score_[ref]; }
  double& operator[](std::uint32_t ref) noexcept { return score_[ref]; }
  std::span<const std::uint32_t> touched() const noexcept { return {touched_.data(), live_}; }
  std::size_t slots() const noexcept { return score_.size(); }

  void clear() noexcept {
    for (std::size_t i = 0; i < live_; ++i) score_[touched_[i]] = 0.0;
    live_ = 0;
  }

 private:
  std::vector<double> score_;
  std::vector<std::uint32_t> touched_;  // first live_ entries are live, in first-touch order
  std::size_t live_ = 0;
};

}  // namespace sknj
