#include "dfl/runner.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dfl/config.hpp"

namespace dfl {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

Json stat_json(const MetricStat& s) {
  Json j;
  j["mean"] = s.mean ? Json(*s.mean) : Json(nullptr);
  j["std"] = s.std ? Json(*s.std) : Json(nullptr);
  j["count"] = s.count;
  return j;
}

Json metrics_json(const ExperimentSummary& s, AttackKind attack) {
  Json j = Json::object();
  for (const auto& name : metric_names(attack)) {
    if (name == "f1") j["f1"] = stat_json(s.f1);
    if (name == "test_loss") j["test_loss"] = stat_json(s.test_loss);
    if (name == "asr_lf") j["asr_lf"] = stat_json(s.asr_lf);
    if (name == "ba") j["ba"] = stat_json(s.ba);
  }
  return j;
}

Json summary_header(const ExperimentConfig& cfg) {
  Json j;
  j["name"] = cfg.name;
  j["dataset"] = cfg.dataset.name;
  j["attack"] = std::string(to_string(cfg.attack.kind));
  j["pnr"] = cfg.attack.kind == AttackKind::kNone ? 0.0 : cfg.attack.pnr;
  j["aggregator"] = std::string(to_string(cfg.federation.aggregator.kind));
  j["partition"] = std::string(to_string(cfg.partition.mode));
  j["nodes"] = cfg.federation.n_nodes;
  j["rounds"] = cfg.federation.rounds;
  j["seed"] = cfg.seed;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Removes what an earlier run may have left behind; other files are kept.
void clear_outputs(const fs::path& dir) {
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name == "config.yaml" || name == "rounds.csv" || name == "summary.json" || name.starts_with("repeat_")) {
      fs::remove_all(entry.path());
    }
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> metric_names(AttackKind attack) {
  std::vector<std::string> out{"f1", "test_loss"};
  if (attack == AttackKind::kLabelFlipTargeted) out.push_back("asr_lf");
  if (attack == AttackKind::kBackdoor) out.push_back("ba");
  return out;
}

std::string rounds_csv(std::span<const NodeMetrics> rows, bool header) {
  std::ostringstream s;
  if (header) s << kRoundsCsvHeader << '\n';
  for (const auto& r : rows) {
    if (r.round < 1) continue;
    s << r.round << ',' << r.node << ',' << (r.benign ? 1 : 0) << ',' << format_double(r.f1) << ','
      << format_double(r.test_loss) << ',' << (r.asr_lf ? format_double(*r.asr_lf) : "") << ','
      << (r.ba ? format_double(*r.ba) : "") << ',' << r.n_filtered << '\n';
  }
  return s.str();
}

void run(const ExperimentConfig& cfg, const fs::path& out_dir, const RunnerOptions& options) {
  if (const auto problems = validate_config(cfg); !problems.empty()) throw ConfigError(problems);
  if (fs::exists(out_dir)) {
    if (!fs::is_directory(out_dir)) throw OutputExists(out_dir.string() + " exists and is not a directory");
    if (!fs::is_empty(out_dir)) {
      if (!options.force) {
        throw OutputExists(out_dir.string() + " is not empty; pass --force to overwrite");
      }
      clear_outputs(out_dir);
    }
  }
  fs::create_directories(out_dir);
  write_text(out_dir / "config.yaml", dump_config(cfg));

  std::vector<NodeMetrics> all_rows;
  std::string csv(kRoundsCsvHeader);
  csv += '\n';
  Json runs = Json::array();
  for (int k = 0; k < cfg.repeats; ++k) {
    const fs::path dir = out_dir / ("repeat_" + std::to_string(k));
    fs::create_directories(dir);
    RunOptions ro;
    ro.repeat = k;
    ro.threads = options.threads;
    if (cfg.federation.checkpoints) ro.checkpoint_dir = dir / "checkpoints";

    spdlog::info("{}: repeat {}/{}", cfg.name, k + 1, cfg.repeats);
    const ExperimentReport rep = run_experiment(cfg, ro);

    std::string trace;
    for (const auto& round : rep.rounds) {
      for (const auto& t : round.traces) trace += to_json_line(t) + '\n';
    }
    write_text(dir / "trace.jsonl", trace);

    std::ostringstream manifest;
    write_partition_manifest(manifest, rep.partition);
    Json m = Json::parse(manifest.str());
    m["malicious"] = rep.malicious;
    write_text(dir / "manifest.json", m.dump(2) + '\n');

    write_text(dir / "rounds.csv", rounds_csv(rep.rows));
    csv += rounds_csv(rep.rows, false);

    Json s = summary_header(cfg);
    s["repeat"] = k;
    s["repeat_seed"] = repeat_seed(cfg.seed, k);
    s["malicious"] = rep.malicious;
    s["metrics"] = metrics_json(rep.final, cfg.attack.kind);
    s["initial"] = metrics_json(rep.initial, cfg.attack.kind);
    write_text(dir / "summary.json", s.dump(2) + '\n');

    runs.push_back({{"repeat", k}, {"metrics", s["metrics"]}});
    all_rows.insert(all_rows.end(), rep.rows.begin(), rep.rows.end());
  }
  write_text(out_dir / "rounds.csv", csv);

  Json s = summary_header(cfg);
  s["repeats"] = cfg.repeats;
  s["metrics"] = metrics_json(summarize(all_rows, cfg.federation.rounds), cfg.attack.kind);
  s["initial"] = metrics_json(summarize(all_rows, 0), cfg.attack.kind);
  s["runs"] = std::move(runs);
  write_text(out_dir / "summary.json", s.dump(2) + '\n');
}

}  // namespace dfl
