#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "sknj/candidate_set.hpp"
#include "sknj/sparse_vector.hpp"

namespace sknj {

/// Exhaustive in-memory KNN join used as a reference. Each outer vector is
/// expanded into a dense length-D array and every inner vector is scored
/// against it; no merge loop or inverted list is involved. Rows keep all
/// positive scores when `keep_all` is set, otherwise the top k.
inline std::vector<KnnRow> oracle_knn(std::span<const SparseVector> r_set,
                                      std::span<const SparseVector> s_set, std::size_t k,
                                      Dimension dims, bool keep_all = false) {
  std::vector<KnnRow> rows;
  rows.reserve(r_set.size());
  std::vector<double> dense(dims, 0.0);
  for (const SparseVector& r : r_set) {
    for (const Feature& f : r.features) dense[f.d] = f.w;
    KnnRow row{r.id, {}};
    for (const SparseVector& s : s_set) {
      double score = 0.0;
      for (const Feature& f : s.features) score += dense[f.d] * static_cast<double>(f.w);
      if (score > 0.0) row.neighbors.push_back({s.id, score});
    }
    const auto better = [](const Neighbor& a, const Neighbor& b) {
      return a.score != b.score ? a.score > b.score : a.id < b.id;
    };
    if (!keep_all && row.neighbors.size() > k) {
      std::partial_sort(row.neighbors.begin(), row.neighbors.begin() + static_cast<std::ptrdiff_t>(k),
                        row.neighbors.end(), better);
      row.neighbors.resize(k);
    } else {
      std::sort(row.neighbors.begin(), row.neighbors.end(), better);
    }
    rows.push_back(std::move(row));
    for (const Feature& f : r.features) dense[f.d] = 0.0;
  }
  return rows;
}

}  // namespace sknj
