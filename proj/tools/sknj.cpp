// sknj: generate, convert and join sparse vector datasets.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sknj/commands.hpp"

int main(int argc, char** argv) {
  using namespace sknj;

  CLI::App app{"K-nearest-neighbor join for high-dimensional sparse vectors"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--page-size", global.page_size, "Buffer page size in bytes")->capture_default_str();
  app.add_option("--threads", global.threads, "Worker threads (>1 joins R blocks concurrently)")
      ->capture_default_str();

  // generate
  GenerateOptions gen;
  std::string gen_features = "80:120";
  std::string gen_weights = "0:1";
  auto* generate = app.add_subcommand("generate", "Write a synthetic sparse dataset");
  generate->add_option("--count", gen.spec.vector_count, "Number of vectors")->required();
  generate->add_option("--dims", gen.spec.dims, "Dimensionality D")->capture_default_str();
  generate->add_option("--features", gen_features, "Features per vector, lo:hi")->capture_default_str();
  generate->add_option("--weights", gen_weights, "Weight interval (lo, hi]")->capture_default_str();
  generate->add_option("--seed", gen.spec.seed, "RNG seed")->capture_default_str();
  generate->add_option("--first-id", gen.spec.first_id, "Id of the first vector")->capture_default_str();
  generate->add_option("--out", gen.out, "Output dataset")->required();

  // convert
  ConvertOptions conv;
  auto* convert = app.add_subcommand("convert", "Convert spectra text to a dataset (m/z x 10 -> dimension)");
  convert->add_option("--in", conv.in, "Spectra text file")->required();
  convert->add_option("--out", conv.out, "Output dataset")->required();
  convert->add_option("--dims", conv.dims, "Dimensionality cap; peaks beyond it are dropped")
      ->capture_default_str();

  // join
  JoinOptions jo;
  std::string jo_algo = "iiib";
  std::size_t jo_pages = 0;
  auto* join = app.add_subcommand("join", "KNN join of R against S, TSV on stdout or --out");
  join->add_option("--r", jo.r, "Outer dataset R")->required();
  join->add_option("--s", jo.s, "Inner dataset S")->required();
  join->add_option("--k", jo.k, "Neighbors per R vector")->capture_default_str();
  join->add_option("--algo", jo_algo, "bf | iib | iiib")->capture_default_str();
  auto* pct = join->add_option("--buffer-pct", jo.buffer_pct, "Buffer as % of |R|+|S| bytes")
                  ->capture_default_str();
  join->add_option("--buffer-pages", jo_pages, "Buffer size in pages")->excludes(pct);
  join->add_option("--r-fraction", jo.r_fraction, "Share of the buffer for R blocks")->capture_default_str();
  join->add_option("--out", jo.out, "TSV output file");
  join->add_option("--report", jo.report, "Report file (default: stderr)");

  // bench
  BenchOptions bo;
  std::string bo_axis;
  std::vector<std::string> bo_algos{"bf", "iib", "iiib"};
  std::string bo_features = "80:120";
  std::string bo_weights = "0:1";
  std::string bo_out;
  auto* bench = app.add_subcommand("bench", "Sweep one axis and emit one JSON record per run");
  bench->add_option("--axis", bo_axis, "data-size | relative-size | k | buffer")->required();
  bench->add_option("--values", bo.values, "Axis values (defaults per axis)");
  bench->add_option("--algos", bo_algos, "Algorithms to run")->delimiter(',')->capture_default_str();
  bench->add_option("--repeat", bo.repeat, "Repeats per cell")->capture_default_str();
  bench->add_option("--r-count", bo.r_count, "|R| when not swept")->capture_default_str();
  bench->add_option("--s-count", bo.s_count, "|S| when not swept")->capture_default_str();
  bench->add_option("--dims", bo.data.dims, "Dimensionality of generated data")->capture_default_str();
  bench->add_option("--features", bo_features, "Features per generated vector, lo:hi")->capture_default_str();
  bench->add_option("--weights", bo_weights, "Weight interval (lo, hi]")->capture_default_str();
  bench->add_option("--seed", bo.seed, "Seed for R (S uses seed + 1)")->capture_default_str();
  bench->add_option("--k", bo.k, "k when not swept")->capture_default_str();
  bench->add_option("--buffer-pct", bo.buffer_pct, "Buffer % when not swept")->capture_default_str();
  bench->add_option("--r-fraction", bo.r_fraction, "Share of the buffer for R blocks")->capture_default_str();
  bench->add_option("--r", bo.r, "Existing R dataset (k and buffer axes)");
  bench->add_option("--s", bo.s, "Existing S dataset (k and buffer axes)");
  bench->add_option("--workdir", bo.workdir, "Directory for generated datasets");
  bench->add_option("--out", bo_out, "Report file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  return run_command(
      [&]() -> int {
        if (generate->parsed()) {
          const auto [lo, hi] = parse_count_range(gen_features);
          gen.spec.min_features = lo;
          gen.spec.max_features = hi;
          const auto [wlo, whi] = parse_real_range(gen_weights);
          gen.spec.min_weight = wlo;
          gen.spec.max_weight = whi;
          return cmd_generate(gen, std::cerr);
        }
        if (convert->parsed()) return cmd_convert(conv, std::cerr);
        if (join->parsed()) {
          jo.algorithm = parse_algorithm(jo_algo);
          if (jo_pages > 0) jo.buffer_pages = jo_pages;
          return cmd_join(jo, global, std::cout, std::cerr);
        }
        bo.axis = parse_axis(bo_axis);
        bo.algorithms.clear();
        for (const auto& a : bo_algos) bo.algorithms.push_back(parse_algorithm(a));
        const auto [lo, hi] = parse_count_range(bo_features);
        bo.data.min_features = lo;
        bo.data.max_features = hi;
        const auto [wlo, whi] = parse_real_range(bo_weights);
        bo.data.min_weight = wlo;
        bo.data.max_weight = whi;
        if (bo_out.empty()) return cmd_bench(bo, global, std::cout, std::cerr);
        std::ofstream out(bo_out, std::ios::trunc);
        if (!out) throw DataError("cannot create " + bo_out);
        return cmd_bench(bo, global, out, std::cerr);
      },
      std::cerr);
}
