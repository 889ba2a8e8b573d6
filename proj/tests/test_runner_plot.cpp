#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>
#include <regex>
#include <sstream>

#include "dfl/config.hpp"
#include "dfl/plot.hpp"
#include "dfl/runner.hpp"
#include "support.hpp"

namespace dfl {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

ExperimentConfig tiny() {
  ExperimentConfig cfg;
  cfg.name = "tiny";
  cfg.seed = 9;
  cfg.dataset.classes = 3;
  cfg.dataset.dims = 5;
  cfg.dataset.samples = 2100;
  cfg.federation.n_nodes = 3;
  cfg.federation.rounds = 2;
  cfg.hidden_dims = {6};
  cfg.train.epochs_per_round = 1;
  return cfg;
}

void write_summary(const fs::path& p, const std::string& agg, double pnr, const Json& metrics,
                   const std::string& attack = "model_poison") {
  Json j;
  j["dataset"] = "synthetic";
  j["attack"] = attack;
  j["aggregator"] = agg;
  j["pnr"] = pnr;
  j["metrics"] = metrics;
  std::ofstream(p) << j.dump();
}

Json stat(double mean, double std) { return {{"mean", mean}, {"std", std}, {"count", 3}}; }

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 0.0, -2.5, 1e-300, 123456789.125}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(RoundsCsv, SkipsInitialRoundAndLeavesMissingMetricsEmpty) {
  std::vector<NodeMetrics> rows(2);
  rows[1].round = 1;
  rows[1].benign = false;
  rows[1].f1 = 0.5;
  rows[1].test_loss = 2;
  rows[1].ba = 0.25;
  EXPECT_EQ(rounds_csv(rows), std::string(kRoundsCsvHeader) + "\n1,0,0,0.5,2,,0.25,0\n");
  EXPECT_EQ(rounds_csv(rows, false), "1,0,0,0.5,2,,0.25,0\n");
}

TEST(MetricNames, DependOnAttack) {
  EXPECT_EQ(metric_names(AttackKind::kNone), (std::vector<std::string>{"f1", "test_loss"}));
  EXPECT_EQ(metric_names(AttackKind::kLabelFlipTargeted), (std::vector<std::string>{"f1", "test_loss", "asr_lf"}));
  EXPECT_EQ(metric_names(AttackKind::kBackdoor), (std::vector<std::string>{"f1", "test_loss", "ba"}));
}

TEST(Runner, WritesReportsForEveryRepeat) {
  test::TempDir dir;
  auto cfg = tiny();
  cfg.repeats = 3;
  cfg.federation.checkpoints = true;
  run(cfg, dir.path());
  const auto csv = slurp(dir / "rounds.csv");
  EXPECT_EQ(count_lines(csv), 1 + 2 * 3 * 3);
  EXPECT_TRUE(csv.starts_with(std::string(kRoundsCsvHeader) + "\n"));
  for (int k = 0; k < 3; ++k) {
    const auto rdir = dir / ("repeat_" + std::to_string(k));
    EXPECT_EQ(count_lines(slurp(rdir / "rounds.csv")), 1 + 2 * 3);
    EXPECT_EQ(count_lines(slurp(rdir / "trace.jsonl")), 2 * 3);
    const auto manifest = Json::parse(slurp(rdir / "manifest.json"));
    EXPECT_TRUE(manifest.contains("malicious"));
    EXPECT_TRUE(fs::exists(rdir / "checkpoints" / "round2_node2.lprm"));
    EXPECT_EQ(Json::parse(slurp(rdir / "summary.json"))["repeat"], k);
  }
  const auto s = Json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(s["repeats"], 3);
  EXPECT_EQ(s["runs"].size(), 3u);
  EXPECT_EQ(s["metrics"]["f1"]["count"], 9);
  EXPECT_FALSE(s["metrics"].contains("ba"));
  EXPECT_EQ(parse_config(dir / "config.yaml"), cfg);
}

TEST(Runner, RefusesNonEmptyDirectoryWithoutForce) {
  test::TempDir dir;
  std::ofstream(dir / "keep.txt") << "x";
  EXPECT_THROW(run(tiny(), dir.path()), OutputExists);
  run(tiny(), dir.path(), {.force = true, .threads = std::nullopt});
  EXPECT_TRUE(fs::exists(dir / "keep.txt"));
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
}

TEST(Runner, ByteIdenticalAcrossRerunsAndThreadCounts) {
  test::TempDir a, b;
  auto cfg = tiny();
  cfg.repeats = 2;
  cfg.federation.aggregator.kind = AggregatorKind::kSentinel;
  cfg.attack.kind = AttackKind::kLabelFlipUntargeted;
  cfg.attack.pnr = 0.34;
  run(cfg, a.path());
  run(cfg, b.path(), {.force = false, .threads = 3});
  for (const auto& f : fs::recursive_directory_iterator(a.path())) {
    if (!f.is_regular_file()) continue;
    const auto rel = fs::relative(f.path(), a.path());
    SCOPED_TRACE(rel.string());
    EXPECT_EQ(slurp(f.path()), slurp(b.path() / rel));
  }
  run(cfg, a.path(), {.force = true, .threads = std::nullopt});
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
}

TEST(Plot, SingleSummaryGivesSinglePoints) {
  test::TempDir dir;
  write_summary(dir / "s.json", "sentinel", 0.5, {{"f1", stat(0.9, 0.01)}, {"test_loss", stat(0.3, 0.0)}});
  const std::vector<fs::path> in{dir / "s.json"};
  const auto charts = collect_charts(in);
  ASSERT_EQ(charts.size(), 2u);
  for (const auto& c : charts) {
    ASSERT_EQ(c.series.size(), 1u);
    EXPECT_EQ(c.series.at("sentinel").size(), 1u);
  }
  const auto files = plot(in, dir / "plots");
  EXPECT_EQ(files.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "plots" / "synthetic_model_poison_f1.svg"));
}

TEST(Plot, RenderedValuesEqualSummaryValues) {
  test::TempDir dir;
  std::vector<fs::path> in;
  Rng rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::map<std::pair<std::string, std::string>, double> want;
  for (std::string agg : {"fedavg", "krum"}) {
    for (double pnr : {0.1, 0.5, 0.8}) {
      const double m = u(rng), sd = u(rng) / 10;
      want[{agg, format_double(pnr)}] = m;
      in.push_back(dir / (agg + format_double(pnr) + ".json"));
      write_summary(in.back(), agg, pnr, {{"f1", stat(m, sd)}, {"test_loss", stat(1 + m, sd)}});
    }
  }
  plot(in, dir / "p");
  const auto svg = slurp(dir / "p" / "synthetic_model_poison_f1.svg");
  const std::regex value(R"re(<text class="value" data-aggregator="([a-z_]+)" data-pnr="([0-9.e-]+)"[^>]*>([^<]+)</text>)re");
  int seen = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), value); it != std::sregex_iterator(); ++it, ++seen) {
    EXPECT_EQ(std::stod((*it)[3].str()), want.at({(*it)[1].str(), (*it)[2].str()}));
  }
  EXPECT_EQ(seen, 6);
}

TEST(Plot, MismatchedMetricSetsAndDuplicatesAreErrors) {
  test::TempDir dir;
  write_summary(dir / "a.json", "fedavg", 0.5, {{"f1", stat(0.9, 0)}, {"test_loss", stat(0.3, 0)}});
  write_summary(dir / "b.json", "krum", 0.5, {{"f1", stat(0.9, 0)}});
  write_summary(dir / "c.json", "fedavg", 0.5, {{"f1", stat(0.8, 0)}, {"test_loss", stat(0.3, 0)}});
  write_summary(dir / "d.json", "krum", 0.5, {{"f1", stat(0.9, 0)}}, "backdoor");
  EXPECT_THROW(collect_charts(std::vector<fs::path>{dir / "a.json", dir / "b.json"}), std::invalid_argument);
  EXPECT_THROW(collect_charts(std::vector<fs::path>{dir / "a.json", dir / "c.json"}), std::invalid_argument);
  EXPECT_EQ(collect_charts(std::vector<fs::path>{dir / "a.json", dir / "d.json"}).size(), 3u);
}

}  // namespace
}  // namespace dfl
