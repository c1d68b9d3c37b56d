#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "sknj/sparse_vector.hpp"

namespace sknj::testing {

/// Random vector with `n` distinct dimensions below `dims`, weights in (0, 1].
inline SparseVector random_vector(std::mt19937_64& rng, VectorId id, Dimension dims, std::uint32_t n) {
  std::vector<Dimension> all(dims);
  for (Dimension d = 0; d < dims; ++d) all[d] = d;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min<std::size_t>(n, dims));
  std::sort(all.begin(), all.end());
  std::uniform_real_distribution<float> w(0.0f, 1.0f);
  SparseVector v{id, {}};
  for (Dimension d : all) v.features.push_back({d, 1.0f - w(rng)});
  return v;
}

inline std::vector<SparseVector> random_vectors(std::mt19937_64& rng, std::size_t count, Dimension dims,
                                                std::uint32_t min_f, std::uint32_t max_f,
                                                VectorId first_id = 0) {
  std::uniform_int_distribution<std::uint32_t> nf(min_f, max_f);
  std::vector<SparseVector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_vector(rng, first_id + i, dims, nf(rng)));
  return out;
}

/// Dense-array dot product.
inline double dense_dot(const SparseVector& a, const SparseVector& b, Dimension dims) {
  std::vector<double> x(dims, 0.0);
  std::vector<double> y(dims, 0.0);
  for (const Feature& f : a.features) x[f.d] = f.w;
  for (const Feature& f : b.features) y[f.d] = f.w;
  double sum = 0.0;
  for (Dimension d = 0; d < dims; ++d) sum += x[d] * y[d];
  return sum;
}

inline bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sknj-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace sknj::testing
