#pragma once

// Plain configuration records shared by the simulator and the config parser.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dfl/aggregate.hpp"
#include "dfl/attacks.hpp"
#include "dfl/data.hpp"
#include "dfl/metrics.hpp"
#include "dfl/model.hpp"

namespace dfl {

enum class DatasetKind { kIdx, kSyntheticTabular };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kSyntheticTabular;
  std::string name = "synthetic";
  std::filesystem::path images;  // IDX
  std::filesystem::path labels;  // IDX
  int max_samples = 0;           // 0 keeps every sample
  int classes = 10;              // synthetic
  int dims = 32;                 // synthetic
  int samples = 5000;            // synthetic
  TabularOptions tabular;        // synthetic

  friend bool operator==(const DatasetSpec& a, const DatasetSpec& b) {
    return a.kind == b.kind && a.name == b.name && a.images == b.images && a.labels == b.labels &&
           a.max_samples == b.max_samples && a.classes == b.classes && a.dims == b.dims &&
           a.samples == b.samples && a.tabular.mean_low == b.tabular.mean_low &&
           a.tabular.mean_high == b.tabular.mean_high && a.tabular.noise == b.tabular.noise;
  }
};

enum class Topology { kFull, kRing, kCustom };

struct FederationConfig {
  int n_nodes = 10;
  Topology topology = Topology::kFull;
  std::vector<std::vector<int>> adjacency;  // kCustom only: neighbour lists
  int rounds = 10;
  AggregatorConfig aggregator;
  std::map<int, AggregatorKind> node_aggregators;  // per-node overrides
  // Accepted for completeness; synchronous rounds make them inert.
  double bandwidth_mbps = 1.0;
  double delay_ms = 0.0;
  double loss_percent = 0.0;
  bool checkpoints = false;

  friend bool operator==(const FederationConfig&, const FederationConfig&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  int repeats = 1;
  int threads = 1;
  std::filesystem::path output_dir = "out";
  DatasetSpec dataset;
  PartitionConfig partition;  // seed is derived per run
  FederationConfig federation;
  std::vector<int> hidden_dims{256, 128};
  TrainConfig train;  // seed is derived per node and round
  AttackConfig attack;
  F1Averaging f1 = F1Averaging::kMacro;

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.name == b.name && a.seed == b.seed && a.repeats == b.repeats && a.threads == b.threads &&
           a.output_dir == b.output_dir && a.dataset == b.dataset && a.partition.mode == b.partition.mode &&
           a.partition.alpha == b.partition.alpha && a.partition.test_fraction == b.partition.test_fraction &&
           a.partition.val_fraction == b.partition.val_fraction && a.federation == b.federation &&
           a.hidden_dims == b.hidden_dims && a.train == b.train && a.attack == b.attack && a.f1 == b.f1;
  }
};

}  // namespace dfl
