#pragma once

// Synchronous round-based federation.
//
// Each round runs four barrier-separated phases over all nodes:
// train -> poison outgoing models -> exchange -> aggregate and adopt.
// Work inside a phase may run on several threads; every result is written to
// a per-node slot, so the outcome does not depend on scheduling.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "dfl/experiment.hpp"

namespace dfl {

struct NodeState {
  int id = 0;
  LayeredParams params;
  NodeData data;  // train is poisoned for data-poisoning attackers
  LossHistory loss_history;
  bool malicious = false;
  AttackConfig attack;               // kind == kNone for benign nodes
  std::optional<Dataset> backdoor_eval;  // triggered test set with original labels
};

struct Federation {
  FederationConfig config;
  TrainConfig train;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<NodeState> nodes;
  std::vector<std::vector<int>> adjacency;
};

/// Neighbour lists for the configured topology. Custom adjacency must be
/// symmetric and free of self-loops.
std::vector<std::vector<int>> build_adjacency(const FederationConfig& cfg);

struct RoundReport {
  int round = 0;
  std::vector<AggregationTrace> traces;  // by node id
  std::vector<int> received;             // neighbour models received, by node id
  std::vector<bool> adopted;             // false when the aggregate was non-finite
};

RoundReport run_round(Federation& federation, int round);

struct NodeMetrics {
  int round = 0;
  int node = 0;
  bool benign = true;
  double f1 = 0.0;
  double test_loss = 0.0;
  std::optional<double> asr_lf;
  std::optional<double> ba;
  int n_filtered = 0;
};

std::vector<NodeMetrics> evaluate_nodes(const Federation& federation, int round, F1Averaging averaging,
                                        const AttackConfig& attack);

struct MetricStat {
  std::optional<double> mean;
  std::optional<double> std;  // population standard deviation
  int count = 0;
};

struct ExperimentSummary {
  MetricStat f1;
  MetricStat test_loss;
  MetricStat asr_lf;
  MetricStat ba;
};

/// Mean and spread over benign nodes of one round's rows.
ExperimentSummary summarize(std::span<const NodeMetrics> rows, int round);

struct ExperimentReport {
  std::vector<NodeMetrics> rows;  // round 0 (initial model) through the last round
  std::vector<RoundReport> rounds;
  std::vector<SplitIndices> partition;
  std::vector<int> malicious;
  ExperimentSummary initial;
  ExperimentSummary final;
};

struct RunOptions {
  int repeat = 0;
  std::optional<int> threads;  // overrides the config
  std::optional<std::filesystem::path> checkpoint_dir;
};

/// Seed used for one repeat of an experiment.
std::uint64_t repeat_seed(std::uint64_t seed, int repeat);

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// Builds nodes (partition, attackers, shared initial model) without running rounds.
Federation build_federation(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed,
                            int threads);

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the
/// exception of the lowest failing index.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace dfl
