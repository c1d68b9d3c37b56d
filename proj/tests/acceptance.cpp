// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Expected values come from the dense-array oracle and from
// counts computed here directly from the data, never from the engine.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sknj/commands.hpp"
#include "sknj/sknj.hpp"
#include "test_util.hpp"

namespace {

using namespace sknj;
namespace fs = std::filesystem;

constexpr double kRelTol = 1e-9;

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

std::vector<SparseVector> random_set(std::mt19937_64& rng, std::size_t count, Dimension dims,
                                     std::uint32_t min_f, std::uint32_t max_f) {
  return testing::random_vectors(rng, count, dims, min_f, max_f);
}

/// Block count of greedy in-order packing under `budget` bytes.
std::size_t block_count(const std::vector<SparseVector>& vs, std::size_t budget) {
  std::size_t blocks = 0;
  std::size_t used = 0;
  for (const auto& v : vs) {
    const std::size_t bytes = 12 + 8 * v.features.size();
    if (blocks == 0 || used + bytes > budget) {
      ++blocks;
      used = 0;
    }
    used += bytes;
  }
  return blocks;
}

/// Smallest page count (of `page_size` bytes) that packs `vs` into `target` blocks.
std::size_t pages_for_blocks(const std::vector<SparseVector>& vs, std::size_t target, std::size_t page_size) {
  std::size_t lo = 1;
  std::size_t hi = 1;
  while (block_count(vs, hi * page_size) > target) hi *= 2;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (block_count(vs, mid * page_size) > target) lo = mid + 1;
    else hi = mid;
  }
  return lo;
}

/// Config whose R and S allocations are exactly r_pages and s_pages.
JoinConfig split_config(std::size_t r_pages, std::size_t s_pages, std::size_t page_size) {
  JoinConfig c;
  c.page_size = page_size;
  c.buffer_pages = r_pages + s_pages;
  c.r_fraction = (static_cast<double>(r_pages) + 0.5) / static_cast<double>(c.buffer_pages);
  return c;
}

std::vector<double> scores_of(std::span<const Neighbor> ns) {
  std::vector<double> out;
  out.reserve(ns.size());
  for (const auto& n : ns) out.push_back(n.score);
  std::sort(out.begin(), out.end());
  return out;
}

bool scores_match(std::span<const Neighbor> got, std::span<const Neighbor> want) {
  if (got.size() != want.size()) return false;
  const auto a = scores_of(got);
  const auto b = scores_of(want);
  return std::equal(a.begin(), a.end(), b.begin(),
                    [](double x, double y) { return testing::close_rel(x, y, kRelTol); });
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Every kernel under every block layout equals the oracle.
Outcome oracle_equivalence() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  constexpr Dimension kDims = 1000;
  constexpr std::size_t kPage = 16;
  testing::TempDir dir;
  std::mt19937_64 rng(20240601);
  std::size_t runs = 0;
  for (int instance = 0; instance < 20 && out.ok; ++instance) {
    const auto r_set = random_set(rng, 500, kDims, 20, 60);
    const auto s_set = random_set(rng, 2000, kDims, 20, 60);
    write_dataset(r_set, kDims, dir / "r.sknj");
    write_dataset(s_set, kDims, dir / "s.sknj");
    // Top 21 covers the k-th and (k+1)-th scores for every k below.
    const auto full = oracle_knn(r_set, s_set, 21, kDims);
    for (std::size_t k : {1, 5, 20}) {
      for (std::size_t r_blocks : {1, 3, 7}) {
        for (std::size_t s_blocks : {1, 4}) {
          const std::size_t rp = pages_for_blocks(r_set, r_blocks, kPage);
          const std::size_t sp = pages_for_blocks(s_set, s_blocks, kPage);
          if (block_count(r_set, rp * kPage) != r_blocks || block_count(s_set, sp * kPage) != s_blocks) {
            out.fail("no budget yields the requested block layout");
            continue;
          }
          for (Algorithm algo : {Algorithm::bf, Algorithm::iib, Algorithm::iiib}) {
            JoinConfig config = split_config(rp, sp, kPage);
            config.k = k;
            config.algorithm = algo;
            const JoinOutput got = block_nested_loops_join(dir / "r.sknj", dir / "s.sknj", config);
            ++runs;
            const std::string where = "instance " + std::to_string(instance) + " k=" + std::to_string(k) +
                                      " " + std::string(to_string(algo)) + " layout " +
                                      std::to_string(r_blocks) + "x" + std::to_string(s_blocks);
            if (got.counters.r_blocks_read != r_blocks || got.counters.s_blocks_read != r_blocks * s_blocks) {
              out.fail(where + ": block counts differ from the requested layout");
            }
            if (got.rows.size() != r_set.size()) {
              out.fail(where + ": row count");
              continue;
            }
            for (std::size_t i = 0; i < r_set.size(); ++i) {
              const auto& all = full[i].neighbors;
              const std::size_t n = std::min(k, all.size());
              const std::span<const Neighbor> want(all.data(), n);
              const auto& row = got.rows[i];
              if (row.r_id != r_set[i].id || !scores_match(row.neighbors, want)) {
                out.fail(where + ": scores differ for r=" + std::to_string(r_set[i].id));
                break;
              }
              const bool separated =
                  n < k || all.size() == n || std::abs(all[n - 1].score - all[n].score) > kRelTol;
              if (!separated) continue;
              std::vector<VectorId> a;
              std::vector<VectorId> b;
              for (const auto& x : row.neighbors) a.push_back(x.id);
              for (const auto& x : want) b.push_back(x.id);
              std::sort(a.begin(), a.end());
              std::sort(b.begin(), b.end());
              if (a != b) {
                out.fail(where + ": neighbor ids differ for r=" + std::to_string(r_set[i].id));
                break;
              }
            }
          }
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 60.0) out.fail("runtime " + std::to_string(elapsed) + " s >= 60 s");
  if (out.ok) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu joins in %.1f s", runs, elapsed);
    out.detail = buf;
  }
  return out;
}

// 2. Cost counters equal sums computed directly from the blocks.
Outcome counter_laws() {
  Outcome out;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  for (int trial = 0; trial < 10; ++trial) {
    const Dimension dims = 200 + static_cast<Dimension>(trial) * 50;
    Block br;
    Block bs;
    br.vectors = random_set(rng, size(rng), dims, 1, 40);
    bs.vectors = random_set(rng, size(rng), dims, 1, 40);

    std::uint64_t pair_sum = 0;
    for (const auto& r : br.vectors) {
      for (const auto& s : bs.vectors) pair_sum += r.size() + s.size();
    }
    std::uint64_t built = 0;
    std::map<Dimension, std::uint64_t> list_len;
    for (const auto& s : bs.vectors) {
      built += s.size();
      for (const auto& f : s.features) ++list_len[f.d];
    }
    std::uint64_t visited = 0;
    for (const auto& r : br.vectors) {
      for (const auto& f : r.features) visited += list_len.count(f.d) ? list_len[f.d] : 0;
    }

    CostCounters bf;
    JoinState s1(br, 5);
    BruteForceKernel brute;
    brute.prepare(br);
    brute.join(br, bs, s1, bf);
    CostCounters iib;
    JoinState s2(br, 5);
    InvertedIndexKernel kernel;
    kernel.prepare(br);
    kernel.join(br, bs, s2, iib);

    const std::string where = "pair " + std::to_string(trial) + ": ";
    if (bf.feature_visits != pair_sum) {
      out.fail(where + "BF feature_visits " + std::to_string(bf.feature_visits) + " != " + std::to_string(pair_sum));
    }
    if (iib.postings_built != built) out.fail(where + "IIB postings_built");
    if (iib.postings_visited != visited) out.fail(where + "IIB postings_visited");
  }
  if (out.ok) out.detail = "10 block pairs";
  return out;
}

// 3. Residual features are bounded by min_prune and the split loses nothing.
Outcome split_soundness() {
  Outcome out;
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<std::size_t> size(1, 60);
  std::uniform_real_distribution<double> prune(0.01, 3.0);
  std::size_t residual_total = 0;
  for (int call = 0; call < 1000 && out.ok; ++call) {
    const Dimension dims = 50 + static_cast<Dimension>(rng() % 400);
    Block br;
    Block bs;
    br.vectors = random_set(rng, size(rng), dims, 1, 30);
    bs.vectors = random_set(rng, size(rng), dims, 1, 30);
    const double min_prune = prune(rng);

    // Independent profile: counts and max weights, order by (count desc, d asc).
    std::vector<std::uint32_t> count(dims, 0);
    std::vector<float> max_w(dims, 0.0f);
    for (const auto& r : br.vectors) {
      for (const auto& f : r.features) {
        ++count[f.d];
        max_w[f.d] = std::max(max_w[f.d], f.w);
      }
    }

    CostCounters counters;
    const PrunedIndex index =
        build_inverted_lists_iiib(bs, FrequencyProfile::of(br, dims), min_prune, counters);

    // Reassemble each inner vector from both posting sets.
    std::vector<std::vector<std::pair<Feature, bool>>> rebuilt(bs.size());
    for (Dimension d = 0; d < dims; ++d) {
      for (const Posting& p : index.indexed().list(d)) rebuilt[p.ref].push_back({{d, p.w}, true});
      for (const Posting& p : index.residual().list(d)) rebuilt[p.ref].push_back({{d, p.w}, false});
    }
    for (std::size_t i = 0; i < bs.size() && out.ok; ++i) {
      auto& parts = rebuilt[i];
      std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.first.d < b.first.d; });
      std::vector<Feature> features;
      std::vector<Feature> residual;
      for (const auto& [f, indexed] : parts) {
        features.push_back(f);
        if (!indexed) residual.push_back(f);
      }
      if (features != bs.vectors[i].features) {
        out.fail("call " + std::to_string(call) + ": indexed + residual != original features");
        break;
      }
      std::sort(residual.begin(), residual.end(), [&](const Feature& a, const Feature& b) {
        return count[a.d] != count[b.d] ? count[a.d] > count[b.d] : a.d < b.d;
      });
      double bound = 0.0;
      for (const Feature& f : residual) bound += static_cast<double>(max_w[f.d]) * static_cast<double>(f.w);
      if (!(bound <= min_prune)) {
        out.fail("call " + std::to_string(call) + ": residual bound " + std::to_string(bound) + " > " +
                 std::to_string(min_prune));
      }
      residual_total += residual.size();
    }
  }
  if (out.ok) out.detail = "1000 builds, " + std::to_string(residual_total) + " residual features checked";
  return out;
}

// 4. Pruning shrinks the index once MinPruneScore is positive, and the
// inverted-index kernels beat brute force on CPU time.
Outcome pruning_effectiveness() {
  Outcome out;
  testing::TempDir dir;
  SyntheticSpec spec;
  spec.dims = 10000;
  spec.min_features = 80;
  spec.max_features = 120;
  spec.vector_count = 10000;
  spec.seed = 4;
  generate(spec, dir / "r.sknj");
  spec.seed = 5;
  generate(spec, dir / "s.sknj");

  JoinConfig base;
  base.k = 5;
  base.buffer_pages = 600;
  base.r_fraction = 0.5;

  // Per-S-block postings_built for IIB and IIIB on identical blocks.
  std::size_t compared = 0;
  {
    BlockReader r_reader(dir / "r.sknj", base.r_pages());
    while (auto br = r_reader.next()) {
      InvertedIndexKernel iib;
      PrunedInvertedIndexKernel iiib(spec.dims);
      iib.prepare(*br);
      iiib.prepare(*br);
      JoinState a(*br, base.k);
      JoinState b(*br, base.k);
      BlockReader s_reader(dir / "s.sknj", base.s_pages());
      std::size_t s_index = 0;
      while (auto bs = s_reader.next()) {
        CostCounters ca;
        CostCounters cb;
        iib.join(*br, *bs, a, ca);
        iiib.join(*br, *bs, b, cb);
        if (s_index > 0) {
          ++compared;
          if (!(cb.postings_built < ca.postings_built)) {
            out.fail("S block " + std::to_string(s_index + 1) + ": IIIB built " +
                     std::to_string(cb.postings_built) + " postings, IIB " + std::to_string(ca.postings_built));
          }
        }
        refresh_min_prune_score(a);
        refresh_min_prune_score(b);
        ++s_index;
      }
    }
  }
  if (compared == 0) out.fail("fewer than 2 S blocks");

  std::map<Algorithm, std::vector<double>> cpu;
  for (int rep = 0; rep < 3; ++rep) {
    for (Algorithm algo : {Algorithm::bf, Algorithm::iib, Algorithm::iiib}) {
      JoinConfig config = base;
      config.algorithm = algo;
      const CostCounters c =
          block_nested_loops_join(dir / "r.sknj", dir / "s.sknj", config, [](VectorId, std::span<const Neighbor>) {});
      cpu[algo].push_back(c.cpu_seconds);
    }
  }
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double bf = median(cpu[Algorithm::bf]);
  const double iib = median(cpu[Algorithm::iib]);
  const double iiib = median(cpu[Algorithm::iiib]);
  char buf[160];
  std::snprintf(buf, sizeof buf, "cpu median bf=%.2fs iib=%.2fs iiib=%.2fs, %zu S blocks compared", bf, iib, iiib,
                compared);
  if (!(iib < bf / 2)) out.fail(std::string("cpu(IIB) >= cpu(BF)/2: ") + buf);
  if (!(iiib <= iib)) out.fail(std::string("cpu(IIIB) > cpu(IIB): ") + buf);
  if (out.ok) out.detail = buf;
  return out;
}

// 5. A smaller buffer re-reads S more often, by the ratio the block
// capacities predict, without changing any scores.
Outcome buffer_behavior() {
  Outcome out;
  testing::TempDir dir;
  SyntheticSpec spec;
  spec.dims = 2000;
  spec.min_features = 10;
  spec.max_features = 40;
  spec.vector_count = 1500;
  spec.seed = 50;
  generate(spec, dir / "r.sknj");
  spec.vector_count = 2500;
  spec.seed = 51;
  generate(spec, dir / "s.sknj");
  const auto r_set = read_all(dir / "r.sknj");
  const auto s_set = read_all(dir / "s.sknj");
  constexpr std::size_t kPage = 1024;
  const auto total = fs::file_size(dir / "r.sknj") + fs::file_size(dir / "s.sknj");

  struct Run {
    JoinConfig config;
    JoinOutput result;
    std::size_t expected_s_reads = 0;
  };
  const auto run = [&](double pct) {
    Run r;
    r.config.page_size = kPage;
    r.config.buffer_pages = buffer_pages_for(pct, total, kPage);
    r.result = block_nested_loops_join(dir / "r.sknj", dir / "s.sknj", r.config);
    r.expected_s_reads = block_count(r_set, r.config.r_pages() * kPage) * block_count(s_set, r.config.s_pages() * kPage);
    return r;
  };
  const Run big = run(50);
  const Run small = run(10);
  for (const Run* r : {&big, &small}) {
    if (r->result.counters.s_blocks_read != r->expected_s_reads) {
      out.fail("s_blocks_read " + std::to_string(r->result.counters.s_blocks_read) + " != capacity prediction " +
               std::to_string(r->expected_s_reads));
    }
  }
  // Exact ratio check in integers: small / big == expected_small / expected_big.
  if (small.result.counters.s_blocks_read * big.expected_s_reads !=
      big.result.counters.s_blocks_read * small.expected_s_reads) {
    out.fail("s_blocks_read ratio differs from the capacity prediction");
  }
  if (!(small.result.counters.s_blocks_read > big.result.counters.s_blocks_read)) {
    out.fail("10% buffer did not read more S blocks");
  }
  for (std::size_t i = 0; i < big.result.rows.size(); ++i) {
    if (scores_of(big.result.rows[i].neighbors) != scores_of(small.result.rows[i].neighbors)) {
      out.fail("score multiset changed for r=" + std::to_string(big.result.rows[i].r_id));
      break;
    }
  }
  if (out.ok) {
    out.detail = "s_blocks_read " + std::to_string(big.result.counters.s_blocks_read) + " -> " +
                 std::to_string(small.result.counters.s_blocks_read);
  }
  return out;
}

// 6. Byte-exact round trip and golden spectra conversion.
Outcome format_round_trip() {
  Outcome out;
  testing::TempDir dir;
  std::mt19937_64 rng(606);
  const auto vs = random_set(rng, 10000, 5000, 0, 120);
  write_dataset(vs, 5000, dir / "a.sknj");
  const auto back = read_all(dir / "a.sknj");
  write_dataset(back, 5000, dir / "b.sknj");
  if (back.size() != vs.size()) out.fail("vector count changed on read");
  if (slurp(dir / "a.sknj") != slurp(dir / "b.sknj")) out.fail("second write differs from first");

  const fs::path data = SKNJ_TEST_DATA_DIR;
  convert_spectra(data / "golden_spectra.txt", dir / "golden.sknj");
  if (slurp(dir / "golden.sknj") != slurp(data / "golden_spectra.sknj")) {
    out.fail("spectra conversion differs from golden_spectra.sknj");
  }
  if (out.ok) out.detail = "10000 vectors, 3 golden spectra";
  return out;
}

// 7. Same seeds and flags, same TSV bytes.
Outcome determinism() {
  Outcome out;
  testing::TempDir dir;
  std::ostringstream log;
  std::string first;
  for (int run = 0; run < 2; ++run) {
    const std::string tag = std::to_string(run);
    GenerateOptions g;
    g.spec.dims = 3000;
    g.spec.min_features = 20;
    g.spec.max_features = 50;
    g.spec.vector_count = 1000;
    g.spec.seed = 9;
    g.out = dir / ("r" + tag + ".sknj");
    cmd_generate(g, log);
    g.spec.vector_count = 1500;
    g.spec.seed = 10;
    g.out = dir / ("s" + tag + ".sknj");
    cmd_generate(g, log);
    JoinOptions j;
    j.r = dir / ("r" + tag + ".sknj");
    j.s = dir / ("s" + tag + ".sknj");
    j.k = 10;
    j.buffer_pct = 20;
    j.out = dir / ("out" + tag + ".tsv");
    std::ostringstream stdout_sink;
    GlobalOptions global;
    global.page_size = 4096;
    cmd_join(j, global, stdout_sink, log);
    const std::string tsv = slurp(j.out);
    if (run == 0) first = tsv;
    else if (tsv != first) out.fail("TSV output differs between runs");
    if (tsv.empty()) out.fail("empty TSV output");
  }
  if (out.ok) out.detail = std::to_string(first.size()) + " identical bytes";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number; default runs all.
  std::set<int> only;
  for (int a = 1; a < argc; ++a) only.insert(std::atoi(argv[a]));
  struct Criterion {
    const char* name;
    Outcome (*check)();
  };
  const Criterion criteria[] = {
      {"oracle equivalence", oracle_equivalence}, {"counter laws", counter_laws},
      {"split soundness", split_soundness},       {"pruning effectiveness", pruning_effectiveness},
      {"buffer behavior", buffer_behavior},       {"format round trip", format_round_trip},
      {"determinism", determinism},
  };
  int failures = 0;
  int number = 0;
  for (const auto& c : criteria) {
    ++number;
    if (!only.empty() && !only.count(number)) continue;
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("[%s] %d. %s: %s\n", o.ok ? "PASS" : "FAIL", number, c.name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
