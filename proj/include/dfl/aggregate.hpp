#pragma once

// Aggregation rules a node applies to its own model and its neighbours'.
//
// Baselines: FedAvg, coordinate-wise median, trimmed mean, (Multi-)Krum and a
// decentralised FLTrust port. Sentinel runs three phases before averaging:
//
//   1. similarity filtering   drop neighbours whose layer-averaged row-wise
//                             cosine similarity to the local model is < tau_s
//   2. bootstrap validation   score survivors on the node's bootstrap set,
//                             keep a per-neighbour loss history, and map the
//                             averaged loss distance to a weight in [0, 1]
//   3. layer normalization    scale neighbour layers down to the local
//                             layer norm (never up)
//
// and finally averages the local model (weight 1) with the normalized,
// weighted survivors.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfl/data.hpp"
#include "dfl/params.hpp"

namespace dfl {

using NodeId = int;

struct NeighborModel {
  NodeId id;
  std::reference_wrapper<const LayeredParams> params;

  const LayeredParams& get() const { return params.get(); }
};

struct AggregationInput {
  NodeId self = 0;
  std::reference_wrapper<const LayeredParams> local;
  std::vector<NeighborModel> neighbors;  // ascending id
  const Dataset* bootstrap = nullptr;    // required by Sentinel only
  int round = 0;
};

enum class AggregatorKind { kFedAvg, kMedian, kTrimmedMean, kKrum, kFLTrust, kSentinel };

std::string_view to_string(AggregatorKind kind);
std::optional<AggregatorKind> aggregator_from_string(std::string_view name);

/// Which way the layer-norm ratio points.
///   kClipToLocal: rho = min(1, |M[l]| / |P[l]|)  neighbours above the local norm are scaled down
///   kLiteral:     rho = min(1, |P[l]| / |M[l]|)  the ratio exactly as printed in the algorithm listing
enum class NormRatio { kClipToLocal, kLiteral };

struct SentinelConfig {
  double tau_s = 0.5;   // similarity threshold
  double tau_l = 0.1;   // minimum mapped loss weight
  double l_min = 0.001;  // floor of the local mean loss in the damping factor
  NormRatio norm_ratio = NormRatio::kClipToLocal;
  friend bool operator==(const SentinelConfig&, const SentinelConfig&) = default;
};

struct AggregatorConfig {
  AggregatorKind kind = AggregatorKind::kFedAvg;
  SentinelConfig sentinel;
  std::optional<int> trim_k;    // default floor(0.2 * model count)
  std::optional<int> krum_f;    // default floor((n - 2) / 2), capped at n - 3
  int krum_m = 1;               // > 1 selects Multi-Krum
  friend bool operator==(const AggregatorConfig&, const AggregatorConfig&) = default;
};

/// Per-node bootstrap loss record: node id -> (round -> loss).
class LossHistory {
 public:
  void record(NodeId node, int round, double loss);
  std::vector<double> losses(NodeId node) const;
  std::optional<double> mean(NodeId node) const;
  bool empty() const { return history_.empty(); }

  friend bool operator==(const LossHistory&, const LossHistory&) = default;

 private:
  std::map<NodeId, std::map<int, double>> history_;
};

struct NeighborTrace {
  NodeId id = 0;
  std::optional<double> similarity;
  std::optional<double> bootstrap_loss;
  std::optional<double> weight;
  std::vector<double> norm_scales;
  bool filtered = false;  // removed before weighting (similarity, Krum selection)
  bool excluded = false;  // contributes nothing to the aggregate
};

struct AggregationTrace {
  int round = 0;
  NodeId node = 0;
  AggregatorKind kind = AggregatorKind::kFedAvg;
  std::optional<double> local_bootstrap_loss;
  std::vector<NeighborTrace> neighbors;
  std::string note;

  int excluded_count() const;
};

/// One JSON object (no trailing newline).
std::string to_json_line(const AggregationTrace& trace);

LayeredParams fedavg(const AggregationInput& in);
LayeredParams coordinate_median(const AggregationInput& in);
LayeredParams trimmed_mean(const AggregationInput& in, std::optional<int> trim_k = std::nullopt);
LayeredParams krum(const AggregationInput& in, std::optional<int> f = std::nullopt, int m = 1,
                   AggregationTrace* trace = nullptr);
LayeredParams fltrust(const AggregationInput& in, AggregationTrace* trace = nullptr);

struct FilterResult {
  std::vector<NeighborModel> kept;
  std::vector<std::pair<NodeId, double>> similarity;  // every neighbour, input order
};

/// Keeps neighbour j iff cosine_similarity(P_j, M) >= tau_s.
FilterResult similarity_filter(const LayeredParams& local, std::span<const NeighborModel> neighbors,
                               double tau_s);

/// exp(-d / max(mean_local, l_min)) with d = max(mean_neighbor - mean_local, 0);
/// weights below tau_l become 0.
double map_loss_distance(double mean_local, double mean_neighbor, double tau_l, double l_min);

/// History form: means are arithmetic means of all recorded losses. An empty
/// neighbour history falls back to `current_neighbor_loss`.
double map_loss_distance(std::span<const double> local_history, std::span<const double> neighbor_history,
                         double tau_l, double l_min,
                         std::optional<double> current_neighbor_loss = std::nullopt);

struct NormalizedModel {
  LayeredParams params;
  std::vector<double> scales;  // rho per layer
};

NormalizedModel normalize_model(const LayeredParams& local, const LayeredParams& neighbor,
                                NormRatio ratio = NormRatio::kClipToLocal);

/// Full Sentinel aggregation. Records this round's bootstrap losses (own and
/// surviving neighbours) in `history`.
LayeredParams sentinel(const AggregationInput& in, const SentinelConfig& cfg, LossHistory& history,
                       AggregationTrace* trace = nullptr);

/// Dispatches on cfg.kind. `history` is only touched by Sentinel.
LayeredParams aggregate(const AggregationInput& in, const AggregatorConfig& cfg, LossHistory& history,
                        AggregationTrace* trace = nullptr);

}  // namespace dfl
