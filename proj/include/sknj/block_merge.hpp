#pragma once

// Block-wise merge dot product for the brute-force kernel.
//
// Vectors of a block are copied into a structure-of-arrays layout whose rows
// are padded to a multiple of 16 lanes. The merge then compares a block of r
// dimensions against a block of s dimensions per step (16 x 16 with AVX-512,
// 8 x 8 with AVX2) and advances the side whose block ends lower, exactly like
// the element-wise merge but one block at a time.
// Matches are summed in ascending dimension order, so the score is
// bit-identical to merge_dot().

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define SKNJ_HAVE_SIMD_PATH 1
#include <immintrin.h>
#endif

#include "sknj/dataset.hpp"
#include "sknj/sparse_vector.hpp"

namespace sknj {

inline constexpr std::size_t kMergeLanes = 16;

/// Padded SoA copy of a block. Padding lanes hold `pad_dim` with weight 0.
class PaddedBlock {
 public:
  PaddedBlock() = default;
  PaddedBlock(const Block& block, Dimension pad_dim) { assign(block, pad_dim); }

  void assign(const Block& block, Dimension pad_dim) {
    dims_.clear();
    weights_.clear();
    offsets_.assign(1, 0);
    lengths_.clear();
    for (const SparseVector& v : block.vectors) {
      const std::size_t n = v.size();
      const std::size_t padded = std::max(kMergeLanes, (n + kMergeLanes - 1) / kMergeLanes * kMergeLanes);
      for (const Feature& f : v.features) {
        dims_.push_back(f.d);
        weights_.push_back(f.w);
      }
      dims_.insert(dims_.end(), padded - n, pad_dim);
      weights_.insert(weights_.end(), padded - n, 0.0f);
      offsets_.push_back(dims_.size());
      lengths_.push_back(n);
    }
  }

  std::size_t size() const noexcept { return lengths_.size(); }
  std::size_t length(std::size_t i) const noexcept { return lengths_[i]; }
  std::size_t padded_length(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }
  const Dimension* dims(std::size_t i) const noexcept { return dims_.data() + offsets_[i]; }
  const float* weights(std::size_t i) const noexcept { return weights_.data() + offsets_[i]; }

 private:
  std::vector<Dimension> dims_;
  std::vector<float> weights_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> lengths_;
};

// R and S rows use different pad values so padding never matches padding.
// A real dimension equal to a pad value only adds a zero-weight product.
inline constexpr Dimension kOuterPad = 0xFFFFFFFFu;
inline constexpr Dimension kInnerPad = 0xFFFFFFFEu;

namespace detail {

inline double block_merge_dot_scalar(const Dimension* ad, const float* aw, std::size_t a_len,
                                     const Dimension* bd, const float* bw, std::size_t b_len) noexcept {
  double score = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a_len && j < b_len) {
    const Dimension x = ad[i];
    const Dimension y = bd[j];
    if (x == y) score += static_cast<double>(aw[i]) * static_cast<double>(bw[j]);
    i += x <= y;
    j += y <= x;
  }
  return score;
}

#ifdef SKNJ_HAVE_SIMD_PATH
#define SKNJ_AVX2 __attribute__((target("avx2,bmi")))

SKNJ_AVX2 inline __m256i avx2_eq(__m256i a, __m256i b) noexcept { return _mm256_cmpeq_epi32(a, b); }
SKNJ_AVX2 inline __m256i avx2_rot(__m256i v, __m256i idx) noexcept { return _mm256_permutevar8x32_epi32(v, idx); }
SKNJ_AVX2 inline unsigned avx2_lanes(__m256i m) noexcept {
  return static_cast<unsigned>(_mm256_movemask_ps(_mm256_castsi256_ps(m)));
}

SKNJ_AVX2 inline double block_merge_dot_avx2(
    const Dimension* ad, const float* aw, std::size_t a_padded, const Dimension* bd, const float* bw,
    std::size_t b_padded) noexcept {
  const __m256i r1 = _mm256_setr_epi32(1, 2, 3, 4, 5, 6, 7, 0);
  const __m256i r2 = _mm256_setr_epi32(2, 3, 4, 5, 6, 7, 0, 1);
  const __m256i r3 = _mm256_setr_epi32(3, 4, 5, 6, 7, 0, 1, 2);
  const __m256i r4 = _mm256_setr_epi32(4, 5, 6, 7, 0, 1, 2, 3);
  const __m256i r5 = _mm256_setr_epi32(5, 6, 7, 0, 1, 2, 3, 4);
  const __m256i r6 = _mm256_setr_epi32(6, 7, 0, 1, 2, 3, 4, 5);
  const __m256i r7 = _mm256_setr_epi32(7, 0, 1, 2, 3, 4, 5, 6);
  double score = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a_padded && j < b_padded) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(ad + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bd + j));
    const __m256i m0 = _mm256_or_si256(avx2_eq(va, vb), avx2_eq(va, avx2_rot(vb, r1)));
    const __m256i m1 = _mm256_or_si256(avx2_eq(va, avx2_rot(vb, r2)), avx2_eq(va, avx2_rot(vb, r3)));
    const __m256i m2 = _mm256_or_si256(avx2_eq(va, avx2_rot(vb, r4)), avx2_eq(va, avx2_rot(vb, r5)));
    const __m256i m3 = _mm256_or_si256(avx2_eq(va, avx2_rot(vb, r6)), avx2_eq(va, avx2_rot(vb, r7)));
    // Bit p set: lane p of r matches some lane of s. Lanes are ascending.
    unsigned hits = avx2_lanes(_mm256_or_si256(_mm256_or_si256(m0, m1), _mm256_or_si256(m2, m3)));
    while (hits != 0) {
      const unsigned p = static_cast<unsigned>(__builtin_ctz(hits));
      hits &= hits - 1;
      const unsigned q = static_cast<unsigned>(
          __builtin_ctz(avx2_lanes(avx2_eq(_mm256_set1_epi32(static_cast<int>(ad[i + p])), vb))));
      score += static_cast<double>(aw[i + p]) * static_cast<double>(bw[j + q]);
    }
    const Dimension a_last = ad[i + 7];
    const Dimension b_last = bd[j + 7];
    i += a_last <= b_last ? 8 : 0;
    j += b_last <= a_last ? 8 : 0;
  }
  return score;
}

#define SKNJ_AVX512 __attribute__((target("avx512f,bmi")))

/// 16 x 16 steps: each r lane is broadcast and compared with 16 s lanes.
/// Bit q of `hits` marks an s lane equal to some r lane; lanes ascend, so
/// matches are summed in ascending dimension order.
SKNJ_AVX512 inline double block_merge_dot_avx512(const Dimension* ad, const float* aw, std::size_t a_padded,
                                                 const Dimension* bd, const float* bw,
                                                 std::size_t b_padded) noexcept {
  double score = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a_padded && j < b_padded) {
    const __m512i vb = _mm512_loadu_si512(bd + j);
    const Dimension* a = ad + i;
    __mmask16 h = 0;
#pragma GCC unroll 16
    for (int k = 0; k < 16; ++k) h |= _mm512_cmpeq_epi32_mask(_mm512_set1_epi32(static_cast<int>(a[k])), vb);
    unsigned hits = h;
    if (hits != 0) {
      const __m512i va = _mm512_loadu_si512(a);
      do {
        const unsigned q = static_cast<unsigned>(__builtin_ctz(hits));
        hits &= hits - 1;
        const unsigned p = static_cast<unsigned>(
            __builtin_ctz(_mm512_cmpeq_epi32_mask(_mm512_set1_epi32(static_cast<int>(bd[j + q])), va)));
        score += static_cast<double>(aw[i + p]) * static_cast<double>(bw[j + q]);
      } while (hits != 0);
    }
    const Dimension a_last = ad[i + 15];
    const Dimension b_last = bd[j + 15];
    i += a_last <= b_last ? 16 : 0;
    j += b_last <= a_last ? 16 : 0;
  }
  return score;
}

/// Number of the first `len` dims that are <= x; `padded` is a multiple of 16.
SKNJ_AVX512 inline std::size_t count_le_avx512(const Dimension* dims, std::size_t len, std::size_t padded,
                                               Dimension x) noexcept {
  const __m512i vx = _mm512_set1_epi32(static_cast<int>(x));
  std::size_t n = 0;
  for (std::size_t k = 0; k < padded; k += 16) {
    n += static_cast<std::size_t>(__builtin_popcount(_mm512_cmple_epu32_mask(_mm512_loadu_si512(dims + k), vx)));
  }
  return std::min(n, len);
}

/// Row r_i against every s_j: scores and element-wise merge advances.
SKNJ_AVX512 inline void block_merge_row_avx512(const PaddedBlock& r, std::size_t i, const PaddedBlock& s,
                                               double* scores, std::uint64_t* advances) noexcept {
  const Dimension* ad = r.dims(i);
  const float* aw = r.weights(i);
  const std::size_t nr = r.length(i);
  const std::size_t ap = r.padded_length(i);
  const Dimension r_last = nr ? ad[nr - 1] : 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const std::size_t ns = s.length(j);
    scores[j] = block_merge_dot_avx512(ad, aw, ap, s.dims(j), s.weights(j), s.padded_length(j));
    if (nr == 0 || ns == 0) {
      advances[j] = 0;
      continue;
    }
    const Dimension s_last = s.dims(j)[ns - 1];
    if (r_last == s_last) advances[j] = nr + ns;
    else if (r_last < s_last) advances[j] = nr + count_le_avx512(s.dims(j), ns, s.padded_length(j), r_last);
    else advances[j] = ns + count_le_avx512(ad, nr, ap, s_last);
  }
}

inline bool cpu_has_avx512() noexcept {
  static const bool has = __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("bmi");
  return has;
}

inline bool cpu_has_avx2() noexcept {
  static const bool has = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("bmi");
  return has;
}
#undef SKNJ_AVX2
#undef SKNJ_AVX512
#endif

}  // namespace detail

/// dot(r_i, s_j) over padded rows; equal to merge_dot(r_i, s_j).score.
inline double block_merge_dot(const PaddedBlock& r, std::size_t i, const PaddedBlock& s, std::size_t j) noexcept {
#ifdef SKNJ_HAVE_SIMD_PATH
  if (detail::cpu_has_avx512()) {
    return detail::block_merge_dot_avx512(r.dims(i), r.weights(i), r.padded_length(i), s.dims(j), s.weights(j),
                                          s.padded_length(j));
  }
  if (detail::cpu_has_avx2()) {
    return detail::block_merge_dot_avx2(r.dims(i), r.weights(i), r.padded_length(i), s.dims(j), s.weights(j),
                                        s.padded_length(j));
  }
#endif
  return detail::block_merge_dot_scalar(r.dims(i), r.weights(i), r.length(i), s.dims(j), s.weights(j),
                                        s.length(j));
}

/// Scores and merge advances of r_i against every row of s, written to
/// scores[j] and advances[j].
inline void block_merge_row(const PaddedBlock& r, std::size_t i, const PaddedBlock& s, double* scores,
                            std::uint64_t* advances) noexcept;

/// Iterator advances of the element-wise merge of r and s, without running
/// it: the merge stops when the side with the lower last dimension runs out,
/// after the other side has passed every dimension up to that one.
inline std::uint64_t merge_advances(std::span<const Feature> r, std::span<const Feature> s) noexcept {
  if (r.empty() || s.empty()) return 0;
  const auto upto = [](std::span<const Feature> v, Dimension d) {
    return static_cast<std::uint64_t>(
        std::upper_bound(v.begin(), v.end(), d, [](Dimension x, const Feature& f) { return x < f.d; }) -
        v.begin());
  };
  const Dimension r_last = r.back().d;
  const Dimension s_last = s.back().d;
  if (r_last < s_last) return r.size() + upto(s, r_last);
  if (s_last < r_last) return s.size() + upto(r, s_last);
  return r.size() + s.size();
}

/// merge_advances() over padded rows.
inline std::uint64_t merge_advances(const PaddedBlock& r, std::size_t i, const PaddedBlock& s,
                                    std::size_t j) noexcept {
  const std::size_t nr = r.length(i);
  const std::size_t ns = s.length(j);
  if (nr == 0 || ns == 0) return 0;
  const Dimension r_last = r.dims(i)[nr - 1];
  const Dimension s_last = s.dims(j)[ns - 1];
  if (r_last == s_last) return nr + ns;
  const bool r_first = r_last < s_last;
  const PaddedBlock& other = r_first ? s : r;
  const std::size_t k = r_first ? j : i;
  const Dimension last = r_first ? r_last : s_last;
#ifdef SKNJ_HAVE_SIMD_PATH
  if (detail::cpu_has_avx512()) {
    return (r_first ? nr : ns) +
           detail::count_le_avx512(other.dims(k), other.length(k), other.padded_length(k), last);
  }
#endif
  const Dimension* d = other.dims(k);
  return (r_first ? nr : ns) + static_cast<std::uint64_t>(std::upper_bound(d, d + other.length(k), last) - d);
}

inline void block_merge_row(const PaddedBlock& r, std::size_t i, const PaddedBlock& s, double* scores,
                            std::uint64_t* advances) noexcept {
#ifdef SKNJ_HAVE_SIMD_PATH
  if (detail::cpu_has_avx512()) {
    detail::block_merge_row_avx512(r, i, s, scores, advances);
    return;
  }
#endif
  for (std::size_t j = 0; j < s.size(); ++j) {
    scores[j] = block_merge_dot(r, i, s, j);
    advances[j] = merge_advances(r, i, s, j);
  }
}

}  // namespace sknj
