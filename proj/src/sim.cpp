#include "dfl/sim.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <thread>

#include "dfl/params_io.hpp"
#include "dfl/random.hpp"

namespace dfl {
namespace {

// Stream tags for derive_seed.
enum SeedTag : std::uint64_t {
  kTagRepeat = 1,
  kTagData,
  kTagPartition,
  kTagMalicious,
  kTagInit,
  kTagTrain,
  kTagDataPoison,
  kTagModelPoison,
};

std::filesystem::path resolve_data_path(const std::filesystem::path& p) {
  if (p.is_absolute()) return p;
  if (const char* dir = std::getenv("DFL_DATA_DIR"); dir != nullptr && *dir != '\0') {
    const auto candidate = std::filesystem::path(dir) / p;
    if (std::filesystem::exists(candidate)) return candidate;
  }
  return p;
}

MetricStat stat_of(const std::vector<double>& v) {
  MetricStat s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  s.mean = mean;
  s.std = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

AggregatorConfig aggregator_for(const FederationConfig& cfg, int node) {
  AggregatorConfig out = cfg.aggregator;
  if (auto it = cfg.node_aggregators.find(node); it != cfg.node_aggregators.end()) out.kind = it->second;
  return out;
}

}  // namespace

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(n, 0)));
  const int workers = std::clamp(threads, 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::vector<int>> build_adjacency(const FederationConfig& cfg) {
  const int n = cfg.n_nodes;
  if (n < 1) throw std::invalid_argument("federation needs at least one node");
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  switch (cfg.topology) {
    case Topology::kFull:
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i != j) adj[static_cast<std::size_t>(i)].push_back(j);
        }
      }
      return adj;
    case Topology::kRing:
      for (int i = 0; i < n && n > 1; ++i) {
        auto& a = adj[static_cast<std::size_t>(i)];
        a.push_back((i + n - 1) % n);
        if (n > 2) a.push_back((i + 1) % n);
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
      }
      return adj;
    case Topology::kCustom:
      if (static_cast<int>(cfg.adjacency.size()) != n) {
        throw std::invalid_argument("custom adjacency needs one neighbour list per node");
      }
      for (int i = 0; i < n; ++i) {
        auto a = cfg.adjacency[static_cast<std::size_t>(i)];
        std::sort(a.begin(), a.end());
        if (std::adjacent_find(a.begin(), a.end()) != a.end()) {
          throw std::invalid_argument("custom adjacency lists a neighbour twice");
        }
        for (int j : a) {
          if (j < 0 || j >= n) throw std::invalid_argument("custom adjacency references an unknown node");
          if (j == i) throw std::invalid_argument("custom adjacency contains a self-loop");
          const auto& back = cfg.adjacency[static_cast<std::size_t>(j)];
          if (std::find(back.begin(), back.end(), i) == back.end()) {
            throw std::invalid_argument("custom adjacency is not symmetric");
          }
        }
        adj[static_cast<std::size_t>(i)] = std::move(a);
      }
      return adj;
  }
  return adj;
}

RoundReport run_round(Federation& fed, int round) {
  const int n = static_cast<int>(fed.nodes.size());
  RoundReport report;
  report.round = round;
  report.traces.resize(static_cast<std::size_t>(n));
  report.received.assign(static_cast<std::size_t>(n), 0);
  report.adopted.assign(static_cast<std::size_t>(n), true);

  // train
  std::vector<LayeredParams> trained(static_cast<std::size_t>(n));
  parallel_for(n, fed.threads, [&](int i) {
    const auto& node = fed.nodes[static_cast<std::size_t>(i)];
    TrainConfig cfg = fed.train;
    cfg.seed = derive_seed(fed.seed, {kTagTrain, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(round)});
    trained[static_cast<std::size_t>(i)] = train_local(node.params, node.data.train, cfg);
  });

  // poison outgoing models
  std::vector<LayeredParams> outgoing(static_cast<std::size_t>(n));
  parallel_for(n, fed.threads, [&](int i) {
    const auto& node = fed.nodes[static_cast<std::size_t>(i)];
    const auto& mine = trained[static_cast<std::size_t>(i)];
    if (node.malicious && node.attack.kind == AttackKind::kModelPoison) {
      outgoing[static_cast<std::size_t>(i)] = poison_model(
          mine, node.attack.nr, node.attack.amplitude,
          derive_seed(fed.seed, {kTagModelPoison, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(round)}));
    } else {
      outgoing[static_cast<std::size_t>(i)] = mine;
    }
  });

  // exchange + aggregate
  std::vector<LayeredParams> next(static_cast<std::size_t>(n));
  parallel_for(n, fed.threads, [&](int i) {
    auto& node = fed.nodes[static_cast<std::size_t>(i)];
    AggregationInput in{.self = i,
                        .local = std::cref(trained[static_cast<std::size_t>(i)]),
                        .neighbors = {},
                        .bootstrap = &node.data.bootstrap,
                        .round = round};
    for (int j : fed.adjacency[static_cast<std::size_t>(i)]) {
      in.neighbors.push_back({j, std::cref(outgoing[static_cast<std::size_t>(j)])});
    }
    report.received[static_cast<std::size_t>(i)] = static_cast<int>(in.neighbors.size());
    next[static_cast<std::size_t>(i)] =
        aggregate(in, aggregator_for(fed.config, i), node.loss_history, &report.traces[static_cast<std::size_t>(i)]);
  });

  // adopt
  for (int i = 0; i < n; ++i) {
    auto& candidate = next[static_cast<std::size_t>(i)];
    if (all_finite(candidate)) {
      fed.nodes[static_cast<std::size_t>(i)].params = std::move(candidate);
    } else {
      report.adopted[static_cast<std::size_t>(i)] = false;
      spdlog::warn("round {}: node {} produced non-finite parameters, keeping previous model", round, i);
    }
  }
  return report;
}

std::vector<NodeMetrics> evaluate_nodes(const Federation& fed, int round, F1Averaging averaging,
                                        const AttackConfig& attack) {
  const int n = static_cast<int>(fed.nodes.size());
  std::vector<NodeMetrics> out(static_cast<std::size_t>(n));
  parallel_for(n, fed.threads, [&](int i) {
    const auto& node = fed.nodes[static_cast<std::size_t>(i)];
    NodeMetrics m;
    m.round = round;
    m.node = i;
    m.benign = !node.malicious;
    const auto eval = evaluate(node.params, node.data.test);
    m.f1 = f1_score(eval.confusion, averaging);
    m.test_loss = eval.mean_loss;
    if (attack.kind == AttackKind::kLabelFlipTargeted) {
      m.asr_lf = asr_label_flip(eval.confusion, attack.source, attack.target);
    }
    if (attack.kind == AttackKind::kBackdoor && node.backdoor_eval) {
      const auto b = evaluate(node.params, *node.backdoor_eval);
      m.ba = backdoor_accuracy(b.confusion, attack.target, node.backdoor_eval->size());
    }
    out[static_cast<std::size_t>(i)] = m;
  });
  return out;
}

ExperimentSummary summarize(std::span<const NodeMetrics> rows, int round) {
  std::vector<double> f1, loss, asr, ba;
  for (const auto& r : rows) {
    if (r.round != round || !r.benign) continue;
    f1.push_back(r.f1);
    loss.push_back(r.test_loss);
    if (r.asr_lf) asr.push_back(*r.asr_lf);
    if (r.ba) ba.push_back(*r.ba);
  }
  return {stat_of(f1), stat_of(loss), stat_of(asr), stat_of(ba)};
}

std::uint64_t repeat_seed(std::uint64_t seed, int repeat) {
  return derive_seed(seed, {kTagRepeat, static_cast<std::uint64_t>(repeat)});
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  Dataset ds;
  if (spec.kind == DatasetKind::kIdx) {
    ds = load_idx_images(resolve_data_path(spec.images), resolve_data_path(spec.labels));
  } else {
    ds = synth_tabular(spec.classes, spec.dims, spec.samples, derive_seed(seed, {kTagData}), spec.tabular);
  }
  if (spec.max_samples > 0 && spec.max_samples < ds.size()) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(ds.size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {kTagData, 1}));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(spec.max_samples));
    std::sort(idx.begin(), idx.end());
    ds = subset(ds, idx);
  }
  ds.validate();
  return ds;
}

Federation build_federation(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed, int threads) {
  Federation fed;
  fed.config = cfg.federation;
  fed.train = cfg.train;
  fed.seed = seed;
  fed.threads = threads;
  fed.adjacency = build_adjacency(cfg.federation);

  PartitionConfig pc = cfg.partition;
  pc.nodes = cfg.federation.n_nodes;
  pc.seed = derive_seed(seed, {kTagPartition});
  auto parts = partition(data, pc);

  const auto malicious = cfg.attack.kind == AttackKind::kNone
                             ? std::vector<int>{}
                             : select_malicious(pc.nodes, cfg.attack.pnr, derive_seed(seed, {kTagMalicious}),
                                                cfg.attack.observer);

  const MlpSpec spec{static_cast<int>(data.dims()), cfg.hidden_dims, data.num_classes};
  const LayeredParams init = init_params(spec, derive_seed(seed, {kTagInit}));

  fed.nodes.resize(parts.size());
  parallel_for(static_cast<int>(parts.size()), threads, [&](int i) {
    auto& node = fed.nodes[static_cast<std::size_t>(i)];
    node.id = i;
    node.params = init;
    node.data = std::move(parts[static_cast<std::size_t>(i)]);
    node.malicious = std::find(malicious.begin(), malicious.end(), i) != malicious.end();
    if (cfg.attack.kind == AttackKind::kBackdoor) {
      node.backdoor_eval = build_backdoor_eval_set(node.data.test, cfg.attack.trigger, cfg.attack.target);
    }
    if (!node.malicious) return;
    node.attack = cfg.attack;
    const auto poison_seed = derive_seed(seed, {kTagDataPoison, static_cast<std::uint64_t>(i)});
    switch (cfg.attack.kind) {
      case AttackKind::kLabelFlipUntargeted:
        node.data.train = flip_labels_untargeted(node.data.train, poison_seed);
        break;
      case AttackKind::kLabelFlipTargeted:
        node.data.train = flip_labels_targeted(node.data.train, cfg.attack.source, cfg.attack.target);
        break;
      case AttackKind::kBackdoor:
        node.data.train = implant_backdoor(node.data.train, cfg.attack.trigger, cfg.attack.target,
                                           cfg.attack.poison_fraction, poison_seed);
        break;
      case AttackKind::kNone:
      case AttackKind::kModelPoison:
        break;
    }
  });
  return fed;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  const std::uint64_t seed = repeat_seed(cfg.seed, options.repeat);
  const Dataset data = load_dataset(cfg.dataset, cfg.seed);
  Federation fed = build_federation(cfg, data, seed, options.threads.value_or(cfg.threads));

  ExperimentReport report;
  for (const auto& node : fed.nodes) {
    if (node.malicious) report.malicious.push_back(node.id);
  }
  auto initial = evaluate_nodes(fed, 0, cfg.f1, cfg.attack);
  report.rows.insert(report.rows.end(), initial.begin(), initial.end());

  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);
  for (int r = 1; r <= cfg.federation.rounds; ++r) {
    auto rr = run_round(fed, r);
    auto rows = evaluate_nodes(fed, r, cfg.f1, cfg.attack);
    for (auto& row : rows) row.n_filtered = rr.traces[static_cast<std::size_t>(row.node)].excluded_count();
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    report.rounds.push_back(std::move(rr));
    if (options.checkpoint_dir) {
      for (const auto& node : fed.nodes) {
        save_params(*options.checkpoint_dir / ("round" + std::to_string(r) + "_node" + std::to_string(node.id) + ".lprm"),
                    node.params);
      }
    }
  }
  report.initial = summarize(report.rows, 0);
  report.final = summarize(report.rows, cfg.federation.rounds);
  report.partition.reserve(fed.nodes.size());
  for (const auto& node : fed.nodes) report.partition.push_back(node.data.indices);
  return report;
}

}  // namespace dfl
