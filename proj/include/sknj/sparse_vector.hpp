#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sknj/counters.hpp"
#include "sknj/errors.hpp"

namespace sknj {

using VectorId = std::uint64_t;
using Dimension = std::uint32_t;

/// One non-zero coordinate of a sparse vector. Dimensions are 0-based.
struct Feature {
  Dimension d = 0;
  float w = 0.0f;

  friend bool operator==(const Feature&, const Feature&) = default;
};

/// A sparse vector: an id plus its features in strictly ascending dimension
/// order, every weight strictly positive.
struct SparseVector {
  VectorId id = 0;
  std::vector<Feature> features;

  std::size_t size() const noexcept { return features.size(); }
  bool empty() const noexcept { return features.empty(); }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// Throws DataError naming the vector id when a feature is out of order,
/// non-positive (or NaN), or has d >= dims.
inline void validate(const SparseVector& v, Dimension dims) {
  const auto fail = [&](const std::string& what) {
    throw DataError("vector " + std::to_string(v.id) + ": " + what);
  };
  for (std::size_t i = 0; i < v.features.size(); ++i) {
    const Feature& f = v.features[i];
    if (!(f.w > 0.0f)) fail("non-positive weight at dimension " + std::to_string(f.d));
    if (f.d >= dims) {
      fail("dimension " + std::to_string(f.d) + " out of range (D = " + std::to_string(dims) + ")");
    }
    if (i > 0 && v.features[i - 1].d >= f.d) fail("unsorted features");
  }
}

struct MergeDot {
  double score = 0.0;
  std::uint64_t advances = 0;
};

/// Two-iterator merge over dimension-sorted features. Stops as soon as either
/// side is exhausted, so advances <= |r| + |s|.
inline MergeDot merge_dot(std::span<const Feature> r, std::span<const Feature> s) noexcept {
  MergeDot out;
  std::size_t i = 0;
  std::size_t j = 0;
  const std::size_t nr = r.size();
  const std::size_t ns = s.size();
  while (i < nr && j < ns) {
    const Dimension dr = r[i].d;
    const Dimension ds = s[j].d;
    if (dr == ds) {
      out.score += static_cast<double>(r[i].w) * static_cast<double>(s[j].w);
    }
    i += dr <= ds;
    j += ds <= dr;
  }
  out.advances = i + j;
  return out;
}

/// Exact dot product; charges the true number of iterator advances.
inline double dot(const SparseVector& r, const SparseVector& s, CostCounters& counters) noexcept {
  const MergeDot m = merge_dot(r.features, s.features);
  counters.feature_visits += m.advances;
  counters.feature_advances += m.advances;
  return m.score;
}

inline double dot(const SparseVector& r, const SparseVector& s) noexcept {
  return merge_dot(r.features, s.features).score;
}

}  // namespace sknj
