#pragma once

// Experiment runner: executes every repeat of a config and writes its reports.
//
// Layout of the output directory:
//   config.yaml     echo of the parsed config
//   rounds.csv      per-round, per-node metrics of all repeats (rounds 1..R)
//   summary.json    final-round mean and std over benign nodes, pooled across repeats
//   repeat_K/       the same two reports for repeat K, plus
//     trace.jsonl   one aggregation trace per node and round
//     manifest.json partition indices and malicious node ids
//     checkpoints/  per-round LPRM parameter files (federation.checkpoints only)

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "dfl/experiment.hpp"
#include "dfl/sim.hpp"

namespace dfl {

/// The output directory already holds files and --force was not given.
class OutputExists : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunnerOptions {
  bool force = false;
  std::optional<int> threads;  // overrides the config
};

inline constexpr std::string_view kRoundsCsvHeader = "round,node,benign,f1,test_loss,asr_lf,ba,n_filtered";

/// Rows for rounds >= 1 only; round 0 is the untrained model and lives in the summary.
std::string rounds_csv(std::span<const NodeMetrics> rows, bool header = true);

/// Metrics reported for an attack: f1 and test_loss, plus asr_lf or ba where they apply.
std::vector<std::string> metric_names(AttackKind attack);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

void run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, const RunnerOptions& options = {});

}  // namespace dfl
