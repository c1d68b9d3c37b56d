#pragma once

// Command implementations behind the `sknj` tool. Each cmd_* function takes
// parsed options, writes its outputs, and throws UsageError / DataError on
// failure; run_command() maps those to exit codes 1 / 2.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "sknj/counters.hpp"
#include "sknj/datagen.hpp"
#include "sknj/dataset.hpp"
#include "sknj/errors.hpp"
#include "sknj/join.hpp"
#include "sknj/kernels.hpp"

namespace sknj {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

struct GlobalOptions {
  std::size_t page_size = kDefaultPageSize;
  unsigned threads = 1;
};

/// Parses "lo:hi" into an inclusive unsigned range.
inline std::pair<std::uint32_t, std::uint32_t> parse_count_range(std::string_view text) {
  const auto colon = text.find(':');
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
  const auto parse = [&](std::string_view part, std::uint32_t& v) {
    const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    return !part.empty() && ec == std::errc{} && p == part.data() + part.size();
  };
  const bool ok = colon == std::string_view::npos
                      ? parse(text, lo) && (hi = lo, true)
                      : parse(text.substr(0, colon), lo) && parse(text.substr(colon + 1), hi);
  if (!ok) throw UsageError("expected a range 'lo:hi', got '" + std::string(text) + "'");
  if (lo > hi) throw UsageError("empty range '" + std::string(text) + "' (lo > hi)");
  return {lo, hi};
}

/// Parses "lo:hi" into a real interval.
inline std::pair<double, double> parse_real_range(std::string_view text) {
  const auto colon = text.find(':');
  double lo = 0;
  double hi = 0;
  const auto parse = [&](std::string_view part, double& v) {
    const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    return !part.empty() && ec == std::errc{} && p == part.data() + part.size();
  };
  if (colon == std::string_view::npos || !parse(text.substr(0, colon), lo) ||
      !parse(text.substr(colon + 1), hi)) {
    throw UsageError("expected a range 'lo:hi', got '" + std::string(text) + "'");
  }
  if (!(lo < hi)) throw UsageError("empty range '" + std::string(text) + "' (lo >= hi)");
  return {lo, hi};
}

/// Whole pages covering `percent` of the combined input size; at least 2.
inline std::size_t buffer_pages_for(double percent, std::uintmax_t total_bytes, std::size_t page_size) {
  if (!(percent > 0.0)) throw UsageError("buffer percentage must be positive");
  const double bytes = percent / 100.0 * static_cast<double>(total_bytes);
  const auto pages = static_cast<std::size_t>(std::ceil(bytes / static_cast<double>(page_size)));
  return std::max<std::size_t>(pages, 2);
}

inline nlohmann::json counters_json(const CostCounters& c) {
  return {{"feature_visits", c.feature_visits},   {"feature_advances", c.feature_advances},
          {"postings_built", c.postings_built},   {"postings_visited", c.postings_visited},
          {"residual_visits", c.residual_visits}, {"r_blocks_read", c.r_blocks_read},
          {"s_blocks_read", c.s_blocks_read},     {"io_time", c.io_seconds},
          {"cpu_time", c.cpu_seconds}};
}

inline nlohmann::json config_json(const JoinConfig& c) {
  return {{"algorithm", std::string(to_string(c.algorithm))},
          {"k", c.k},
          {"page_size", c.page_size},
          {"buffer_pages", c.buffer_pages},
          {"r_fraction", c.r_fraction},
          {"r_pages", c.r_pages()},
          {"s_pages", c.s_pages()},
          {"threads", c.threads}};
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
  SyntheticSpec spec;
  std::filesystem::path out;
};

inline int cmd_generate(const GenerateOptions& opt, std::ostream& log) {
  if (opt.out.empty()) throw UsageError("--out is required");
  const DatasetHeader h = generate(opt.spec, opt.out);
  log << "wrote " << opt.out.string() << ": D=" << h.dims << " vectors=" << h.vector_count
      << " bytes=" << std::filesystem::file_size(opt.out) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// convert

struct ConvertOptions {
  std::filesystem::path in;
  std::filesystem::path out;
  Dimension dims = kDefaultSpectraDims;
};

inline int cmd_convert(const ConvertOptions& opt, std::ostream& log) {
  if (opt.in.empty() || opt.out.empty()) throw UsageError("--in and --out are required");
  if (opt.dims == 0) throw UsageError("--dims must be positive");
  const ConvertSummary s = convert_spectra(opt.in, opt.out, opt.dims);
  log << "wrote " << opt.out.string() << ": spectra=" << s.spectra << " peaks=" << s.peaks
      << " collisions=" << s.collisions << " dropped=" << s.dropped << '\n';
  if (s.dropped > 0) {
    log << "warning: " << s.dropped << " peak(s) mapped to dimension >= " << opt.dims << " and were dropped\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// join

struct JoinOptions {
  std::filesystem::path r;
  std::filesystem::path s;
  std::size_t k = 5;
  Algorithm algorithm = Algorithm::iiib;
  double buffer_pct = 50.0;
  std::optional<std::size_t> buffer_pages;  // overrides buffer_pct
  double r_fraction = 0.8;
  std::filesystem::path out;     // empty: stdout
  std::filesystem::path report;  // empty: the log stream
};

inline JoinConfig make_join_config(const JoinOptions& opt, const GlobalOptions& global) {
  for (const auto& p : {opt.r, opt.s}) {
    if (p.empty()) throw UsageError("--r and --s are required");
    if (!std::filesystem::exists(p)) throw DataError("no such file: " + p.string());
  }
  JoinConfig config;
  config.k = opt.k;
  config.algorithm = opt.algorithm;
  config.page_size = global.page_size;
  config.threads = global.threads;
  config.r_fraction = opt.r_fraction;
  if (global.page_size == 0) throw UsageError("--page-size must be positive");
  config.buffer_pages = opt.buffer_pages ? *opt.buffer_pages
                                         : buffer_pages_for(opt.buffer_pct,
                                                            std::filesystem::file_size(opt.r) +
                                                                std::filesystem::file_size(opt.s),
                                                            global.page_size);
  config.validate();
  return config;
}

inline int cmd_join(const JoinOptions& opt, const GlobalOptions& global, std::ostream& stdout_stream,
                    std::ostream& log) {
  const JoinConfig config = make_join_config(opt, global);
  std::ofstream file;
  if (!opt.out.empty()) {
    file.open(opt.out, std::ios::trunc);
    if (!file) throw DataError("cannot create " + opt.out.string());
  }
  std::ostream& tsv = opt.out.empty() ? stdout_stream : file;
  const detail::Stopwatch wall;
  const CostCounters counters = block_nested_loops_join(
      opt.r, opt.s, config, [&](VectorId id, std::span<const Neighbor> ns) { write_tsv_rows(tsv, id, ns); });
  tsv.flush();
  const double wall_seconds = wall.seconds();

  nlohmann::json record = config_json(config);
  record["command"] = "join";
  record["r"] = opt.r.string();
  record["s"] = opt.s.string();
  record["buffer_pct"] = opt.buffer_pages ? nlohmann::json(nullptr) : nlohmann::json(opt.buffer_pct);
  record["counters"] = counters_json(counters);
  record["wall_time"] = wall_seconds;
  if (opt.report.empty()) {
    log << record.dump() << '\n';
  } else {
    std::ofstream rep(opt.report, std::ios::trunc);
    if (!rep) throw DataError("cannot create " + opt.report.string());
    rep << record.dump() << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

enum class BenchAxis { data_size, relative_size, k, buffer };

inline BenchAxis parse_axis(std::string_view name) {
  if (name == "data-size") return BenchAxis::data_size;
  if (name == "relative-size") return BenchAxis::relative_size;
  if (name == "k") return BenchAxis::k;
  if (name == "buffer") return BenchAxis::buffer;
  throw UsageError("unknown bench axis '" + std::string(name) +
                   "' (expected data-size, relative-size, k or buffer)");
}

inline std::string_view to_string(BenchAxis a) noexcept {
  switch (a) {
    case BenchAxis::data_size: return "data-size";
    case BenchAxis::relative_size: return "relative-size";
    case BenchAxis::k: return "k";
    case BenchAxis::buffer: return "buffer";
  }
  return "?";
}

/// Sweep values used when none are given on the command line.
inline std::vector<double> default_axis_values(BenchAxis a) {
  switch (a) {
    case BenchAxis::data_size: return {10000, 20000, 30000, 40000, 50000};
    case BenchAxis::relative_size: return {1000, 2000, 5000, 10000, 20000, 50000, 100000};
    case BenchAxis::k: return {5, 10, 15, 20};
    case BenchAxis::buffer: return {50, 40, 30, 20, 10};
  }
  return {};
}

struct BenchOptions {
  BenchAxis axis = BenchAxis::k;
  std::vector<double> values;  // empty: default_axis_values(axis)
  std::vector<Algorithm> algorithms{Algorithm::bf, Algorithm::iib, Algorithm::iiib};
  unsigned repeat = 1;
  // Fixed settings; the swept axis overrides one of them per cell.
  std::uint64_t r_count = 10000;
  std::uint64_t s_count = 10000;
  SyntheticSpec data;  // dims, features, weights; vector_count/seed/first_id set per dataset
  std::uint64_t seed = 1;
  std::size_t k = 5;
  double buffer_pct = 50.0;
  double r_fraction = 0.8;
  // Existing datasets, used instead of generated ones on the k and buffer axes.
  std::filesystem::path r;
  std::filesystem::path s;
  std::filesystem::path workdir;  // generated datasets; empty: system temp dir
};

inline int cmd_bench(const BenchOptions& opt, const GlobalOptions& global, std::ostream& out,
                     std::ostream& log) {
  if (opt.repeat < 1) throw UsageError("--repeat must be >= 1");
  if (opt.algorithms.empty()) throw UsageError("no algorithms selected");
  if (opt.r.empty() != opt.s.empty()) throw UsageError("--r and --s must be given together");
  const bool given = !opt.r.empty();
  if (given && (opt.axis == BenchAxis::data_size || opt.axis == BenchAxis::relative_size)) {
    throw UsageError("--r/--s cannot be combined with a size axis");
  }
  opt.data.validate();
  const std::vector<double> values = opt.values.empty() ? default_axis_values(opt.axis) : opt.values;
  for (double v : values) {
    if (!(v > 0.0) || (opt.axis != BenchAxis::buffer && v != std::floor(v))) {
      throw UsageError("invalid value " + std::to_string(v) + " for axis " + std::string(to_string(opt.axis)));
    }
  }

  std::filesystem::path workdir = opt.workdir.empty()
                                      ? std::filesystem::temp_directory_path() / "sknj-bench"
                                      : opt.workdir;
  std::filesystem::create_directories(workdir);

  const std::uint64_t r_seed = opt.seed;
  const std::uint64_t s_seed = opt.seed + 1;
  const auto dataset = [&](char side, std::uint64_t count, std::uint64_t seed) {
    SyntheticSpec spec = opt.data;
    spec.vector_count = count;
    spec.seed = seed;
    spec.first_id = 0;
    const auto path = workdir / (std::string(1, side) + "_n" + std::to_string(count) + "_d" +
                                 std::to_string(spec.dims) + "_f" + std::to_string(spec.min_features) +
                                 "-" + std::to_string(spec.max_features) + "_s" + std::to_string(seed) +
                                 ".sknj");
    if (!std::filesystem::exists(path)) {
      log << "generating " << path.string() << '\n';
      const auto tmp = std::filesystem::path(path.string() + ".tmp");
      generate(spec, tmp);
      std::filesystem::rename(tmp, path);
    }
    return path;
  };

  for (double value : values) {
    std::uint64_t r_count = opt.r_count;
    std::uint64_t s_count = opt.s_count;
    std::size_t k = opt.k;
    double buffer_pct = opt.buffer_pct;
    switch (opt.axis) {
      case BenchAxis::data_size: r_count = s_count = static_cast<std::uint64_t>(value); break;
      case BenchAxis::relative_size: s_count = static_cast<std::uint64_t>(value); break;
      case BenchAxis::k: k = static_cast<std::size_t>(value); break;
      case BenchAxis::buffer: buffer_pct = value; break;
    }
    const auto r_path = given ? opt.r : dataset('r', r_count, r_seed);
    const auto s_path = given ? opt.s : dataset('s', s_count, s_seed);

    for (unsigned rep = 0; rep < opt.repeat; ++rep) {
      for (Algorithm algo : opt.algorithms) {
        JoinOptions jo;
        jo.r = r_path;
        jo.s = s_path;
        jo.k = k;
        jo.algorithm = algo;
        jo.buffer_pct = buffer_pct;
        jo.r_fraction = opt.r_fraction;
        const JoinConfig config = make_join_config(jo, global);
        std::uint64_t rows = 0;
        std::uint64_t pairs = 0;
        const detail::Stopwatch wall;
        const CostCounters counters =
            block_nested_loops_join(r_path, s_path, config, [&](VectorId, std::span<const Neighbor> ns) {
              ++rows;
              pairs += ns.size();
            });
        const double wall_seconds = wall.seconds();

        nlohmann::json record = config_json(config);
        record["command"] = "bench";
        record["axis"] = std::string(to_string(opt.axis));
        record["value"] = value;
        record["repeat"] = rep;
        record["buffer_pct"] = buffer_pct;
        record["r"] = r_path.string();
        record["s"] = s_path.string();
        if (given) {
          record["r_count"] = read_header(r_path).vector_count;
          record["s_count"] = read_header(s_path).vector_count;
        } else {
          record["r_count"] = r_count;
          record["s_count"] = s_count;
          record["generator"] = {{"dims", opt.data.dims},
                                 {"min_features", opt.data.min_features},
                                 {"max_features", opt.data.max_features},
                                 {"min_weight", opt.data.min_weight},
                                 {"max_weight", opt.data.max_weight},
                                 {"r_seed", r_seed},
                                 {"s_seed", s_seed}};
        }
        record["output_rows"] = rows;
        record["output_pairs"] = pairs;
        record["counters"] = counters_json(counters);
        record["wall_time"] = wall_seconds;
        out << record.dump() << '\n';
        out.flush();
      }
    }
  }
  return kExitOk;
}

/// Runs `body`, mapping UsageError to exit 1 and data or I/O failures to 2.
template <typename Body>
int run_command(Body&& body, std::ostream& err) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace sknj
