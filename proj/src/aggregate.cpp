#include "dfl/aggregate.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "dfl/model.hpp"

namespace dfl {
namespace {

// Local model first, then neighbours in input order.
std::vector<const LayeredParams*> all_models(const AggregationInput& in) {
  std::vector<const LayeredParams*> out{&in.local.get()};
  for (const auto& n : in.neighbors) out.push_back(&n.get());
  for (const auto* p : out) {
    require_compatible(*p, in.local.get());
    if (!all_finite(*p)) throw std::invalid_argument("aggregation input contains non-finite parameters");
  }
  return out;
}

std::vector<NodeId> all_ids(const AggregationInput& in) {
  std::vector<NodeId> ids{in.self};
  for (const auto& n : in.neighbors) ids.push_back(n.id);
  return ids;
}

// coordinates x models
RowMatrix<float> stack(const std::vector<const LayeredParams*>& models) {
  RowMatrix<float> out(models.front()->num_scalars(), static_cast<Eigen::Index>(models.size()));
  for (std::size_t j = 0; j < models.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = flatten(*models[j]);
  return out;
}

template <typename Reduce>
LayeredParams per_coordinate(const AggregationInput& in, Reduce reduce) {
  const auto models = all_models(in);
  const RowMatrix<float> s = stack(models);
  Vector<float> out(s.rows());
  std::vector<float> column(models.size());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    std::copy(s.row(i).data(), s.row(i).data() + s.cols(), column.begin());
    std::sort(column.begin(), column.end());
    out(i) = reduce(column);
  }
  return unflatten(in.local.get(), out);
}

void init_trace(AggregationTrace* trace, const AggregationInput& in, AggregatorKind kind) {
  if (!trace) return;
  trace->round = in.round;
  trace->node = in.self;
  trace->kind = kind;
  trace->local_bootstrap_loss.reset();
  trace->neighbors.clear();
  for (const auto& n : in.neighbors) {
    NeighborTrace t;
    t.id = n.id;
    trace->neighbors.push_back(std::move(t));
  }
}

NeighborTrace* find_trace(AggregationTrace* trace, NodeId id) {
  if (!trace) return nullptr;
  for (auto& t : trace->neighbors) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string_view to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kFedAvg: return "fedavg";
    case AggregatorKind::kMedian: return "median";
    case AggregatorKind::kTrimmedMean: return "trimmed_mean";
    case AggregatorKind::kKrum: return "krum";
    case AggregatorKind::kFLTrust: return "fltrust";
    case AggregatorKind::kSentinel: return "sentinel";
  }
  return "?";
}

std::optional<AggregatorKind> aggregator_from_string(std::string_view name) {
  for (auto k : {AggregatorKind::kFedAvg, AggregatorKind::kMedian, AggregatorKind::kTrimmedMean,
                 AggregatorKind::kKrum, AggregatorKind::kFLTrust, AggregatorKind::kSentinel}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void LossHistory::record(NodeId node, int round, double loss) { history_[node][round] = loss; }

std::vector<double> LossHistory::losses(NodeId node) const {
  std::vector<double> out;
  if (auto it = history_.find(node); it != history_.end()) {
    for (const auto& [round, loss] : it->second) out.push_back(loss);
  }
  return out;
}

std::optional<double> LossHistory::mean(NodeId node) const {
  const auto l = losses(node);
  if (l.empty()) return std::nullopt;
  return std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
}

int AggregationTrace::excluded_count() const {
  return static_cast<int>(std::count_if(neighbors.begin(), neighbors.end(), [](const auto& n) { return n.excluded; }));
}

std::string to_json_line(const AggregationTrace& trace) {
  nlohmann::ordered_json j;
  j["round"] = trace.round;
  j["node"] = trace.node;
  j["aggregator"] = to_string(trace.kind);
  j["local_bootstrap_loss"] = opt(trace.local_bootstrap_loss);
  j["neighbors"] = nlohmann::ordered_json::array();
  for (const auto& n : trace.neighbors) {
    j["neighbors"].push_back({{"id", n.id},
                              {"similarity", opt(n.similarity)},
                              {"bootstrap_loss", opt(n.bootstrap_loss)},
                              {"weight", opt(n.weight)},
                              {"norm_scales", n.norm_scales},
                              {"filtered", n.filtered},
                              {"excluded", n.excluded}});
  }
  if (!trace.note.empty()) j["note"] = trace.note;
  return j.dump();
}

LayeredParams fedavg(const AggregationInput& in) {
  const auto models = all_models(in);
  const std::vector<double> weights(models.size(), 1.0);
  return weighted_average(models, weights);
}

LayeredParams coordinate_median(const AggregationInput& in) {
  return per_coordinate(in, [](const std::vector<float>& v) {
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return static_cast<float>((static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2.0);
  });
}

LayeredParams trimmed_mean(const AggregationInput& in, std::optional<int> trim_k) {
  const auto count = static_cast<int>(in.neighbors.size() + 1);
  const int k = trim_k.value_or(static_cast<int>(std::floor(count * 0.2)));
  if (k < 0 || count <= 2 * k) {
    throw InsufficientData("trimmed_mean: " + std::to_string(count) + " models cannot drop " + std::to_string(k) +
                           " from each end");
  }
  return per_coordinate(in, [k](const std::vector<float>& v) {
    double sum = 0.0;
    for (std::size_t i = static_cast<std::size_t>(k); i < v.size() - static_cast<std::size_t>(k); ++i) sum += v[i];
    return static_cast<float>(sum / static_cast<double>(v.size() - 2 * static_cast<std::size_t>(k)));
  });
}

LayeredParams krum(const AggregationInput& in, std::optional<int> f, int m, AggregationTrace* trace) {
  init_trace(trace, in, AggregatorKind::kKrum);
  const auto models = all_models(in);
  const auto ids = all_ids(in);
  const int n = static_cast<int>(models.size());
  const int byzantine = f.value_or(std::min((n - 2) / 2, n - 3));
  if (byzantine < 0 || n < byzantine + 3) {
    spdlog::warn("krum: {} models cannot tolerate f={}, falling back to fedavg", n, byzantine);
    if (trace) trace->note = "fallback:fedavg";
    return fedavg(in);
  }
  if (m < 1 || m > n) throw std::invalid_argument("krum: m must lie in [1, model count]");

  std::vector<Vector<double>> flat;
  flat.reserve(models.size());
  for (const auto* p : models) flat.push_back(flatten(*p).cast<double>());
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) dist(i, j) = dist(j, i) = (flat[i] - flat[j]).squaredNorm();
  }

  const int closest = n - byzantine - 2;
  std::vector<double> score(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<double> d;
    for (int j = 0; j < n; ++j) {
      if (j != i) d.push_back(dist(i, j));
    }
    std::partial_sort(d.begin(), d.begin() + closest, d.end());
    score[static_cast<std::size_t>(i)] = std::accumulate(d.begin(), d.begin() + closest, 0.0);
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return ids[a] < ids[b];
  });

  std::vector<const LayeredParams*> chosen;
  for (int r = 0; r < m; ++r) chosen.push_back(models[static_cast<std::size_t>(order[r])]);
  if (trace) {
    for (int r = 0; r < n; ++r) {
      const int idx = order[static_cast<std::size_t>(r)];
      if (idx == 0) continue;
      auto* t = &trace->neighbors[static_cast<std::size_t>(idx - 1)];
      t->weight = r < m ? 1.0 : 0.0;
      t->filtered = t->excluded = r >= m;
    }
  }
  if (m == 1) return *chosen.front();
  return weighted_average(chosen, std::vector<double>(chosen.size(), 1.0));
}

LayeredParams fltrust(const AggregationInput& in, AggregationTrace* trace) {
  init_trace(trace, in, AggregatorKind::kFLTrust);
  const auto models = all_models(in);
  const LayeredParams& local = in.local.get();
  const auto local_norms = layer_norms(local);

  std::vector<LayeredParams> rescaled;
  std::vector<double> weights{1.0};
  double trust_sum = 0.0;
  for (std::size_t j = 0; j < in.neighbors.size(); ++j) {
    const auto& p = in.neighbors[j].get();
    const double cos = cosine_similarity(p, local);
    const double ts = std::max(0.0, cos);
    const auto norms = layer_norms(p);
    std::vector<double> scales(norms.size(), 1.0);
    for (std::size_t l = 0; l < norms.size(); ++l) {
      if (norms[l] > 0.0) scales[l] = local_norms[l] / norms[l];
    }
    if (auto* t = find_trace(trace, in.neighbors[j].id)) {
      t->similarity = cos;
      t->weight = ts;
      t->norm_scales = scales;
      t->excluded = ts == 0.0;
    }
    if (ts == 0.0) continue;
    trust_sum += ts;
    rescaled.push_back(scale_layers(p, scales));
    weights.push_back(ts);
  }
  if (trust_sum == 0.0) return local;
  std::vector<const LayeredParams*> ptrs{&local};
  for (const auto& r : rescaled) ptrs.push_back(&r);
  return weighted_average(ptrs, weights);
}

FilterResult similarity_filter(const LayeredParams& local, std::span<const NeighborModel> neighbors, double tau_s) {
  FilterResult out;
  for (const auto& n : neighbors) {
    const double s = cosine_similarity(n.get(), local);
    out.similarity.emplace_back(n.id, s);
    if (!(s < tau_s)) out.kept.push_back(n);
  }
  return out;
}

double map_loss_distance(double mean_local, double mean_neighbor, double tau_l, double l_min) {
  if (!(l_min > 0.0)) throw std::invalid_argument("map_loss_distance: l_min must be positive");
  const double kappa = 1.0 / std::max(mean_local, l_min);
  const double distance = std::max(mean_neighbor - mean_local, 0.0);
  const double w = std::exp(-kappa * distance);
  return w < tau_l ? 0.0 : w;
}

double map_loss_distance(std::span<const double> local_history, std::span<const double> neighbor_history,
                         double tau_l, double l_min, std::optional<double> current_neighbor_loss) {
  if (local_history.empty()) throw std::invalid_argument("map_loss_distance: empty local loss history");
  const auto mean = [](std::span<const double> h) {
    return std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(h.size());
  };
  double neighbor_mean = 0.0;
  if (!neighbor_history.empty()) {
    neighbor_mean = mean(neighbor_history);
  } else if (current_neighbor_loss) {
    neighbor_mean = *current_neighbor_loss;
  } else {
    throw std::invalid_argument("map_loss_distance: empty neighbour history and no current loss");
  }
  return map_loss_distance(mean(local_history), neighbor_mean, tau_l, l_min);
}

NormalizedModel normalize_model(const LayeredParams& local, const LayeredParams& neighbor, NormRatio ratio) {
  require_compatible(local, neighbor);
  const auto local_norms = layer_norms(local);
  const auto neighbor_norms = layer_norms(neighbor);
  NormalizedModel out;
  out.scales.assign(local.size(), 1.0);
  for (std::size_t l = 0; l < local.size(); ++l) {
    if (neighbor_norms[l] == 0.0) continue;
    if (ratio == NormRatio::kClipToLocal) {
      out.scales[l] = std::min(1.0, local_norms[l] / neighbor_norms[l]);
    } else if (local_norms[l] > 0.0) {
      out.scales[l] = std::min(1.0, neighbor_norms[l] / local_norms[l]);
    }
  }
  out.params = scale_layers(neighbor, out.scales);
  return out;
}

LayeredParams sentinel(const AggregationInput& in, const SentinelConfig& cfg, LossHistory& history,
                       AggregationTrace* trace) {
  init_trace(trace, in, AggregatorKind::kSentinel);
  const LayeredParams& local = in.local.get();
  all_models(in);
  if (in.bootstrap == nullptr || in.bootstrap->empty()) {
    throw std::invalid_argument("sentinel: bootstrap dataset required");
  }

  // (1) similarity filtering
  const auto filter = similarity_filter(local, in.neighbors, cfg.tau_s);
  for (const auto& [id, s] : filter.similarity) {
    if (auto* t = find_trace(trace, id)) {
      t->similarity = s;
      t->filtered = t->excluded = s < cfg.tau_s;
    }
  }

  // (2) bootstrap validation
  const double local_loss = dataset_loss(local, *in.bootstrap);
  history.record(in.self, in.round, local_loss);
  if (trace) trace->local_bootstrap_loss = local_loss;
  const auto local_history = history.losses(in.self);

  std::vector<NormalizedModel> normalized;
  std::vector<double> weights{1.0};
  for (const auto& n : filter.kept) {
    const double loss = dataset_loss(n.get(), *in.bootstrap);
    history.record(n.id, in.round, loss);
    const auto neighbor_history = history.losses(n.id);
    const double w = map_loss_distance(local_history, neighbor_history, cfg.tau_l, cfg.l_min);
    auto* t = find_trace(trace, n.id);
    if (t) {
      t->bootstrap_loss = loss;
      t->weight = w;
      t->excluded = w == 0.0;
    }
    if (w == 0.0) continue;

    // (3) layer normalization
    normalized.push_back(normalize_model(local, n.get(), cfg.norm_ratio));
    if (t) t->norm_scales = normalized.back().scales;
    weights.push_back(w);
  }

  if (normalized.empty()) return local;
  std::vector<const LayeredParams*> ptrs{&local};
  for (const auto& p : normalized) ptrs.push_back(&p.params);
  return weighted_average(ptrs, weights);
}

LayeredParams aggregate(const AggregationInput& in, const AggregatorConfig& cfg, LossHistory& history,
                        AggregationTrace* trace) {
  switch (cfg.kind) {
    case AggregatorKind::kFedAvg:
      init_trace(trace, in, cfg.kind);
      return fedavg(in);
    case AggregatorKind::kMedian:
      init_trace(trace, in, cfg.kind);
      return coordinate_median(in);
    case AggregatorKind::kTrimmedMean:
      init_trace(trace, in, cfg.kind);
      return trimmed_mean(in, cfg.trim_k);
    case AggregatorKind::kKrum: return krum(in, cfg.krum_f, cfg.krum_m, trace);
    case AggregatorKind::kFLTrust: return fltrust(in, trace);
    case AggregatorKind::kSentinel: return sentinel(in, cfg.sentinel, history, trace);
  }
  throw std::invalid_argument("unknown aggregator");
}

}  // namespace dfl
