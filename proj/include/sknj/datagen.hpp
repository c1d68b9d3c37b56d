#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

#include "sknj/dataset.hpp"
#include "sknj/errors.hpp"
#include "sknj/sparse_vector.hpp"

namespace sknj {

// ---------------------------------------------------------------------------
// Synthetic data

/// Random sparse vectors: feature count uniform in [min_features,
/// max_features], distinct dimensions uniform over [0, D), weights uniform
/// in (min_weight, max_weight].
struct SyntheticSpec {
  std::uint64_t vector_count = 0;
  Dimension dims = 10000;
  std::uint32_t min_features = 80;
  std::uint32_t max_features = 120;
  double min_weight = 0.0;
  double max_weight = 1.0;
  std::uint64_t seed = 0;
  VectorId first_id = 0;

  void validate() const {
    if (dims == 0) throw UsageError("dimensionality must be positive");
    if (min_features > max_features) throw UsageError("feature range is empty (min > max)");
    if (max_features > dims) throw UsageError("feature count cannot exceed D");
    if (!(min_weight >= 0.0 && max_weight > min_weight)) {
      throw UsageError("weight range must satisfy 0 <= min < max");
    }
  }
};

/// Deterministic for a fixed spec (same seed, same standard library).
class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(const SyntheticSpec& spec) : spec_(spec), rng_(spec.seed) {
    spec_.validate();
  }

  SparseVector next() {
    std::uniform_int_distribution<std::uint32_t> count_dist(spec_.min_features, spec_.max_features);
    const std::uint32_t n = count_dist(rng_);
    SparseVector v;
    v.id = spec_.first_id + produced_++;
    v.features.reserve(n);
    // Floyd's sampling: n distinct dimensions out of D.
    chosen_.clear();
    for (std::uint32_t j = spec_.dims - n; j < spec_.dims; ++j) {
      std::uniform_int_distribution<std::uint32_t> pick(0, j);
      const std::uint32_t t = pick(rng_);
      chosen_.insert(chosen_.contains(t) ? j : t);
    }
    dims_.assign(chosen_.begin(), chosen_.end());
    std::sort(dims_.begin(), dims_.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Dimension d : dims_) {
      // hi - u * (hi - lo) with u in [0, 1) lands in (lo, hi].
      auto w = static_cast<float>(spec_.max_weight - unit(rng_) * (spec_.max_weight - spec_.min_weight));
      if (!(w > 0.0f)) w = std::numeric_limits<float>::denorm_min();
      v.features.push_back({d, w});
    }
    return v;
  }

 private:
  SyntheticSpec spec_;
  std::mt19937_64 rng_;
  std::uint64_t produced_ = 0;
  std::unordered_set<std::uint32_t> chosen_;
  std::vector<Dimension> dims_;
};

inline std::vector<SparseVector> generate_vectors(const SyntheticSpec& spec) {
  SyntheticGenerator gen(spec);
  std::vector<SparseVector> out;
  out.reserve(spec.vector_count);
  for (std::uint64_t i = 0; i < spec.vector_count; ++i) out.push_back(gen.next());
  return out;
}

inline DatasetHeader generate(const SyntheticSpec& spec, std::ostream& out) {
  SyntheticGenerator gen(spec);
  DatasetWriter writer(out, spec.dims);
  for (std::uint64_t i = 0; i < spec.vector_count; ++i) writer.append(gen.next());
  return writer.finish();
}

inline DatasetHeader generate(const SyntheticSpec& spec, const std::filesystem::path& path) {
  spec.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create " + path.string());
  return generate(spec, out);
}

// ---------------------------------------------------------------------------
// Spectra conversion
//
// Input: records separated by blank lines. A record starts with
// "# <spectrum-id>" followed by one "m/z intensity" line per peak.
// Each peak maps to dimension round_half_up(m/z * 10) with the intensity as
// its weight.

inline constexpr Dimension kDefaultSpectraDims = 20000;

struct Peak {
  double mz = 0.0;
  double intensity = 0.0;
  std::uint64_t dim = 0;  // quantized m/z
};

struct SpectrumRecord {
  VectorId id = 0;
  std::vector<Peak> peaks;
};

struct ConvertSummary {
  std::uint64_t spectra = 0;
  std::uint64_t peaks = 0;
  std::uint64_t dropped = 0;     // quantized to d >= D_cap
  std::uint64_t collisions = 0;  // merged into an existing dimension
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void spectra_error(std::size_t line, const std::string& what) {
  throw DataError("spectra line " + std::to_string(line) + ": " + what);
}

/// Exact decimal round-half-up of text * 10, e.g. "234.56" -> 2346.
inline std::uint64_t quantize_mz(std::string_view text, std::size_t line) {
  const auto dot = text.find('.');
  const std::string_view int_part = text.substr(0, dot);
  const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  const auto all_digits = [](std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if ((int_part.empty() && frac.empty()) || !all_digits(int_part) || !all_digits(frac) ||
      int_part.size() > 15) {
    spectra_error(line, "malformed m/z '" + std::string(text) + "'");
  }
  std::uint64_t v = 0;
  for (char c : int_part) v = v * 10 + static_cast<std::uint64_t>(c - '0');
  v = v * 10 + (frac.empty() ? 0 : static_cast<std::uint64_t>(frac[0] - '0'));
  if (frac.size() > 1 && frac[1] >= '5') ++v;
  return v;
}

}  // namespace detail

/// Parses the spectra text format. Throws DataError with the line number on
/// malformed or non-positive values.
inline std::vector<SpectrumRecord> parse_spectra(std::istream& in) {
  std::vector<SpectrumRecord> records;
  std::string raw;
  std::size_t line = 0;
  bool in_record = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = detail::trim(raw);
    if (text.empty()) {
      in_record = false;
      continue;
    }
    if (text.front() == '#') {
      const std::string_view id_text = detail::trim(text.substr(1));
      VectorId id = 0;
      const auto [p, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
      if (id_text.empty() || ec != std::errc{} || p != id_text.data() + id_text.size()) {
        detail::spectra_error(line, "spectrum id must be an unsigned integer");
      }
      records.push_back({id, {}});
      in_record = true;
      continue;
    }
    if (!in_record) detail::spectra_error(line, "peak outside a record (missing '# <id>' line)");

    std::istringstream fields{std::string(text)};
    std::string mz_text;
    std::string intensity_text;
    std::string extra;
    if (!(fields >> mz_text >> intensity_text) || (fields >> extra)) {
      detail::spectra_error(line, "expected 'm/z intensity'");
    }
    Peak peak;
    const auto [mp, mec] = std::from_chars(mz_text.data(), mz_text.data() + mz_text.size(), peak.mz);
    const auto [ip, iec] = std::from_chars(intensity_text.data(),
                                           intensity_text.data() + intensity_text.size(), peak.intensity);
    if (mec != std::errc{} || mp != mz_text.data() + mz_text.size()) {
      detail::spectra_error(line, "non-numeric m/z '" + mz_text + "'");
    }
    if (iec != std::errc{} || ip != intensity_text.data() + intensity_text.size()) {
      detail::spectra_error(line, "non-numeric intensity '" + intensity_text + "'");
    }
    if (!(peak.mz > 0.0) || !(peak.intensity > 0.0) || !(static_cast<float>(peak.intensity) > 0.0f)) {
      detail::spectra_error(line, "m/z and intensity must be positive");
    }
    peak.dim = detail::quantize_mz(mz_text, line);
    records.back().peaks.push_back(peak);
  }
  return records;
}

/// Maps one record to a sparse vector: colliding peaks keep the maximum
/// intensity, peaks at d >= dims are dropped.
inline SparseVector spectrum_to_vector(const SpectrumRecord& rec, Dimension dims,
                                       ConvertSummary& summary) {
  std::map<Dimension, double> by_dim;
  for (const Peak& p : rec.peaks) {
    ++summary.peaks;
    if (p.dim >= dims) {
      ++summary.dropped;
      continue;
    }
    const auto [it, inserted] = by_dim.try_emplace(static_cast<Dimension>(p.dim), p.intensity);
    if (!inserted) {
      ++summary.collisions;
      it->second = std::max(it->second, p.intensity);
    }
  }
  SparseVector v;
  v.id = rec.id;
  v.features.reserve(by_dim.size());
  for (const auto& [d, w] : by_dim) v.features.push_back({d, static_cast<float>(w)});
  return v;
}

inline ConvertSummary convert_spectra(std::istream& in, std::ostream& out,
                                      Dimension dims = kDefaultSpectraDims) {
  const std::vector<SpectrumRecord> records = parse_spectra(in);
  ConvertSummary summary;
  DatasetWriter writer(out, dims);
  std::unordered_set<VectorId> seen;
  for (const SpectrumRecord& rec : records) {
    if (!seen.insert(rec.id).second) throw DataError("duplicate spectrum id " + std::to_string(rec.id));
    writer.append(spectrum_to_vector(rec, dims, summary));
    ++summary.spectra;
  }
  writer.finish();
  return summary;
}

inline ConvertSummary convert_spectra(const std::filesystem::path& input,
                                      const std::filesystem::path& output,
                                      Dimension dims = kDefaultSpectraDims) {
  std::ifstream in(input);
  if (!in) throw DataError("cannot open " + input.string());
  std::ofstream out(output, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create " + output.string());
  return convert_spectra(in, out, dims);
}

}  // namespace sknj
