#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sknj/commands.hpp"
#include "test_util.hpp"

namespace sknj {
namespace {

std::vector<std::string> sorted_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  std::sort(lines.begin(), lines.end());
  return lines;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<nlohmann::json> json_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

TEST(ParseRange, AcceptsPairsAndSingleValues) {
  EXPECT_EQ(parse_count_range("80:120"), std::make_pair(80u, 120u));
  EXPECT_EQ(parse_count_range("7"), std::make_pair(7u, 7u));
  EXPECT_THROW(parse_count_range("200:100"), UsageError);
  EXPECT_THROW(parse_count_range("a:b"), UsageError);
  EXPECT_THROW(parse_count_range(":5"), UsageError);
  EXPECT_EQ(parse_real_range("0:1"), std::make_pair(0.0, 1.0));
  EXPECT_THROW(parse_real_range("1:1"), UsageError);
  EXPECT_THROW(parse_real_range("1"), UsageError);
}

TEST(BufferPages, CeilOfPercentageWithFloorOfTwo) {
  EXPECT_EQ(buffer_pages_for(50, 100 * 8192, 8192), 50u);
  EXPECT_EQ(buffer_pages_for(10, 100 * 8192 + 1, 8192), 11u);
  EXPECT_EQ(buffer_pages_for(1, 1000, 8192), 2u);
  EXPECT_THROW(buffer_pages_for(0, 1000, 8192), UsageError);
}

TEST(RunCommand, MapsErrorsToExitCodes) {
  std::ostringstream err;
  EXPECT_EQ(run_command([] { return kExitOk; }, err), 0);
  EXPECT_EQ(run_command([]() -> int { throw UsageError("x"); }, err), 1);
  EXPECT_EQ(run_command([]() -> int { throw DataError("y"); }, err), 2);
  EXPECT_NE(err.str().find("usage error: x"), std::string::npos);
  EXPECT_NE(err.str().find("data error: y"), std::string::npos);
}

TEST(RunCommand, MissingInputIsDataErrorAndBadRangeIsUsageError) {
  testing::TempDir dir;
  std::ostringstream out;
  std::ostringstream err;
  JoinOptions jo;
  jo.r = dir / "missing_r";
  jo.s = dir / "missing_s";
  EXPECT_EQ(run_command([&] { return cmd_join(jo, {}, out, err); }, err), kExitData);
  GenerateOptions go;
  go.out = dir / "g";
  go.spec.min_features = 200;
  go.spec.max_features = 100;
  EXPECT_EQ(run_command([&] { return cmd_generate(go, err); }, err), kExitUsage);
}

class CommandFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    SyntheticSpec spec;
    spec.dims = 500;
    spec.min_features = 5;
    spec.max_features = 15;
    spec.vector_count = 300;
    spec.seed = 11;
    generate(spec, r_path());
    spec.vector_count = 400;
    spec.seed = 12;
    generate(spec, s_path());
  }

  std::filesystem::path r_path() const { return dir_ / "r.sknj"; }
  std::filesystem::path s_path() const { return dir_ / "s.sknj"; }

  std::string run_join(JoinOptions jo, nlohmann::json* report = nullptr, GlobalOptions global = {}) {
    jo.r = r_path();
    jo.s = s_path();
    std::ostringstream out;
    std::ostringstream log;
    EXPECT_EQ(cmd_join(jo, global, out, log), kExitOk);
    if (report) *report = nlohmann::json::parse(log.str());
    return out.str();
  }

  testing::TempDir dir_;
};

TEST_F(CommandFixture, JoinDefaultsProduceFiveNeighborsPerRow) {
  nlohmann::json report;
  const std::string tsv = run_join({}, &report);
  EXPECT_EQ(report["k"], 5);
  EXPECT_EQ(report["algorithm"], "iiib");
  EXPECT_EQ(report["page_size"], 8192);
  EXPECT_EQ(sorted_lines(tsv).size(), 300u * 5u);
}

TEST_F(CommandFixture, SmallerBufferKeepsOutputAndReadsMoreSBlocks) {
  JoinOptions jo;
  GlobalOptions global;
  global.page_size = 512;
  nlohmann::json big;
  nlohmann::json small;
  jo.buffer_pct = 50;
  const std::string a = run_join(jo, &big, global);
  jo.buffer_pct = 10;
  const std::string b = run_join(jo, &small, global);
  EXPECT_EQ(sorted_lines(a), sorted_lines(b));
  EXPECT_GT(small["counters"]["s_blocks_read"].get<std::uint64_t>(),
            big["counters"]["s_blocks_read"].get<std::uint64_t>());
}

TEST_F(CommandFixture, AlgorithmsAgree) {
  JoinOptions jo;
  jo.k = 7;
  std::vector<std::vector<std::string>> outputs;
  for (Algorithm a : {Algorithm::bf, Algorithm::iib, Algorithm::iiib}) {
    jo.algorithm = a;
    outputs.push_back(sorted_lines(run_join(jo)));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(outputs[0], outputs[2]);
}

TEST_F(CommandFixture, OutputFileAndReportFile) {
  JoinOptions jo;
  jo.out = dir_ / "out.tsv";
  jo.report = dir_ / "report.json";
  const std::string stdout_text = run_join(jo);
  EXPECT_TRUE(stdout_text.empty());
  EXPECT_EQ(sorted_lines(slurp(jo.out)).size(), 1500u);
  const auto report = nlohmann::json::parse(slurp(jo.report));
  const double io = report["counters"]["io_time"];
  const double cpu = report["counters"]["cpu_time"];
  const double wall = report["wall_time"];
  EXPECT_LE(io + cpu, wall);
}

TEST_F(CommandFixture, ThreadedJoinIsIdentical) {
  JoinOptions jo;
  jo.buffer_pages = 4;
  GlobalOptions global;
  global.page_size = 1024;
  const std::string seq = run_join(jo, nullptr, global);
  global.threads = 4;
  EXPECT_EQ(run_join(jo, nullptr, global), seq);
}

TEST_F(CommandFixture, RejectsBadJoinOptions) {
  JoinOptions jo;
  jo.r = r_path();
  jo.s = s_path();
  std::ostringstream out;
  jo.k = 0;
  EXPECT_THROW(cmd_join(jo, {}, out, out), UsageError);
  jo.k = 5;
  jo.r_fraction = 1.0;
  EXPECT_THROW(cmd_join(jo, {}, out, out), UsageError);
}

TEST(Bench, KAxisGridAndReplay) {
  testing::TempDir dir;
  BenchOptions opt;
  opt.axis = BenchAxis::k;
  opt.algorithms = {Algorithm::iib, Algorithm::iiib};
  opt.r_count = 100;
  opt.s_count = 150;
  opt.data.dims = 300;
  opt.data.min_features = 5;
  opt.data.max_features = 10;
  opt.workdir = dir.path();
  std::ostringstream out1;
  std::ostringstream out2;
  std::ostringstream log;
  ASSERT_EQ(cmd_bench(opt, {}, out1, log), kExitOk);
  ASSERT_EQ(cmd_bench(opt, {}, out2, log), kExitOk);
  const auto a = json_lines(out1.str());
  const auto b = json_lines(out2.str());
  ASSERT_EQ(a.size(), 8u);
  ASSERT_EQ(b.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]["k"], b[i]["k"]);
    EXPECT_EQ(a[i]["algorithm"], b[i]["algorithm"]);
    for (const char* key : {"feature_visits", "feature_advances", "postings_built", "postings_visited",
                            "residual_visits", "r_blocks_read", "s_blocks_read"}) {
      EXPECT_EQ(a[i]["counters"][key], b[i]["counters"][key]) << key;
    }
    EXPECT_EQ(a[i]["output_pairs"], b[i]["output_pairs"]);
    EXPECT_LE(a[i]["counters"]["io_time"].get<double>() + a[i]["counters"]["cpu_time"].get<double>(),
              a[i]["wall_time"].get<double>());
  }
  EXPECT_EQ(a[0]["k"], 5);
  EXPECT_EQ(a[7]["k"], 20);
}

TEST(Bench, RejectsUnknownAxisAndBadValues) {
  EXPECT_THROW(parse_axis("width"), UsageError);
  EXPECT_EQ(parse_axis("relative-size"), BenchAxis::relative_size);
  BenchOptions opt;
  opt.axis = BenchAxis::k;
  opt.values = {2.5};
  std::ostringstream sink;
  EXPECT_THROW(cmd_bench(opt, {}, sink, sink), UsageError);
}

}  // namespace
}  // namespace sknj
