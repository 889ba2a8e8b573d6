#include "dfl/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dfl/sim.hpp"

namespace dfl {

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::invalid_argument([&] {
        std::string msg = "invalid configuration";
        for (const auto& e : errors) msg += "\n  " + e;
        return msg;
      }()),
      errors_(std::move(errors)) {}

namespace {

template <typename E>
struct EnumName {
  E value;
  std::string_view name;
};

constexpr EnumName<AttackKind> kAttackNames[] = {
    {AttackKind::kNone, "none"},
    {AttackKind::kModelPoison, "model_poison"},
    {AttackKind::kLabelFlipUntargeted, "label_flip_untargeted"},
    {AttackKind::kLabelFlipTargeted, "label_flip_targeted"},
    {AttackKind::kBackdoor, "backdoor"},
};
constexpr EnumName<PartitionMode> kModeNames[] = {{PartitionMode::kIid, "iid"},
                                                  {PartitionMode::kDirichlet, "dirichlet"}};
constexpr EnumName<DatasetKind> kDatasetNames[] = {{DatasetKind::kIdx, "idx"},
                                                   {DatasetKind::kSyntheticTabular, "synthetic_tabular"}};
constexpr EnumName<Topology> kTopologyNames[] = {
    {Topology::kFull, "full"}, {Topology::kRing, "ring"}, {Topology::kCustom, "custom"}};
constexpr EnumName<NormRatio> kNormNames[] = {{NormRatio::kClipToLocal, "clip_to_local"},
                                              {NormRatio::kLiteral, "literal"}};
constexpr EnumName<F1Averaging> kF1Names[] = {{F1Averaging::kMacro, "macro"}, {F1Averaging::kMicro, "micro"}};
constexpr EnumName<TriggerKind> kTriggerNames[] = {{TriggerKind::kImageX, "image_x"},
                                                   {TriggerKind::kTabularOnes, "tabular_ones"}};
constexpr EnumName<Corner> kCornerNames[] = {{Corner::kTopLeft, "top_left"},
                                             {Corner::kTopRight, "top_right"},
                                             {Corner::kBottomLeft, "bottom_left"},
                                             {Corner::kBottomRight, "bottom_right"},
                                             {Corner::kCenter, "center"}};
constexpr EnumName<AggregatorKind> kAggregatorNames[] = {
    {AggregatorKind::kFedAvg, "fedavg"},   {AggregatorKind::kMedian, "median"},
    {AggregatorKind::kTrimmedMean, "trimmed_mean"}, {AggregatorKind::kKrum, "krum"},
    {AggregatorKind::kFLTrust, "fltrust"}, {AggregatorKind::kSentinel, "sentinel"}};

template <typename E, std::size_t N>
std::string_view name_of(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

template <typename E, std::size_t N>
std::string choices(const EnumName<E> (&table)[N]) {
  std::string s;
  for (const auto& e : table) {
    if (!s.empty()) s += ", ";
    s += e.name;
  }
  return s;
}

struct Issue {
  std::string field;
  std::string message;
};

class Reader {
 public:
  Reader(std::string source, std::vector<std::string> overridden)
      : source_(std::move(source)), overridden_(std::move(overridden)) {}

  void error(const YAML::Mark& mark, const std::string& field, const std::string& msg) {
    failed_.insert(field);
    const bool from_cli = mark.is_null() || std::any_of(overridden_.begin(), overridden_.end(), [&](const auto& o) {
                            return o == field || o.starts_with(field + ".");
                          });
    if (from_cli) {
      errors_.push_back(source_ + ": " + field + ": " + msg + " (set on the command line)");
      return;
    }
    std::ostringstream s;
    s << source_ << ":" << mark.line + 1 << ":" << mark.column + 1 << ": " << field << ": " << msg;
    errors_.push_back(s.str());
  }

  void error(const std::string& field, const std::string& msg) {
    failed_.insert(field);
    if (auto it = marks_.find(field); it != marks_.end()) {
      error(it->second, field, msg);
    } else {
      errors_.push_back(source_ + ": " + field + ": " + msg);
    }
  }

  bool failed(const std::string& field) const {
    return std::any_of(failed_.begin(), failed_.end(), [&](const auto& f) {
      return f == field || f.starts_with(field + ".") || field.starts_with(f + ".");
    });
  }

  void remember(const std::string& field, const YAML::Mark& mark) { marks_.emplace(field, mark); }

  std::vector<std::string>& errors() { return errors_; }

 private:
  std::string source_;
  std::vector<std::string> overridden_;  // dotted keys set with --set
  std::vector<std::string> errors_;
  std::map<std::string, YAML::Mark> marks_;
  std::set<std::string> failed_;
};

// One YAML mapping; reports keys nobody asked for when it goes out of scope.
class Section {
 public:
  Section(Reader& r, const YAML::Node& node, std::string path) : r_(r), node_(node), path_(std::move(path)) {
    if (!node_.IsDefined() || node_.IsNull()) {
      node_ = YAML::Node(YAML::NodeType::Map);
      return;
    }
    if (!node_.IsMap()) {
      r_.error(node_.Mark(), path_.empty() ? "<root>" : path_, "expected a mapping");
      node_ = YAML::Node(YAML::NodeType::Map);
      return;
    }
    std::set<std::string> seen;
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      const auto key = it->first.as<std::string>();
      if (!seen.insert(key).second) r_.error(it->first.Mark(), field(key), "duplicate key");
      keys_.emplace(key, it->first.Mark());
    }
  }

  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  ~Section() {
    for (const auto& [key, mark] : keys_) {
      if (!used_.contains(key)) r_.error(mark, field(key), "unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  // Marks the key as known; returns an undefined node if absent.
  YAML::Node child(const std::string& key) {
    used_.insert(key);
    if (auto it = keys_.find(key); it != keys_.end()) {
      r_.remember(field(key), it->second);
      return node_[key];
    }
    return YAML::Node(YAML::NodeType::Undefined);
  }

  bool has(const std::string& key) const { return keys_.contains(key); }

  YAML::Mark mark() const { return node_.Mark(); }

  template <typename T>
  void get(const std::string& key, T& out, bool required = false) {
    const YAML::Node n = child(key);
    if (!n.IsDefined()) {
      if (required) r_.error(node_.Mark(), field(key), "missing required key");
      return;
    }
    convert(n, field(key), out);
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    const YAML::Node n = child(key);
    if (!n.IsDefined() || n.IsNull()) return;
    T v{};
    if (convert(n, field(key), v)) out = v;
  }

  template <typename E, std::size_t N>
  void get_enum(const std::string& key, E& out, const EnumName<E> (&table)[N], bool required = false) {
    std::string s;
    const YAML::Node n = child(key);
    if (!n.IsDefined()) {
      if (required) r_.error(node_.Mark(), field(key), "missing required key");
      return;
    }
    if (!convert(n, field(key), s)) return;
    for (const auto& e : table) {
      if (e.name == s) {
        out = e.value;
        return;
      }
    }
    r_.error(n.Mark(), field(key), "unknown value '" + s + "' (expected one of: " + choices(table) + ")");
  }

  template <typename T>
  bool convert(const YAML::Node& n, const std::string& f, T& out) {
    if (!n.IsScalar()) {
      r_.error(n.Mark(), f, "expected a scalar");
      return false;
    }
    try {
      out = n.as<T>();
      return true;
    } catch (const YAML::BadConversion&) {
      r_.error(n.Mark(), f, std::string("cannot read '") + n.Scalar() + "' as " + type_name<T>());
      return false;
    }
  }

  template <typename T>
  bool convert_list(const YAML::Node& n, const std::string& f, std::vector<T>& out) {
    if (!n.IsSequence()) {
      r_.error(n.Mark(), f, "expected a list");
      return false;
    }
    std::vector<T> v;
    bool ok = true;
    for (std::size_t i = 0; i < n.size(); ++i) {
      T x{};
      ok = convert(n[i], f + "[" + std::to_string(i) + "]", x) && ok;
      v.push_back(x);
    }
    if (ok) out = std::move(v);
    return ok;
  }

  Reader& reader() { return r_; }

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) {
      return "a boolean";
    } else if constexpr (std::is_integral_v<T>) {
      return "an integer";
    } else if constexpr (std::is_floating_point_v<T>) {
      return "a number";
    } else {
      return "a string";
    }
  }

  Reader& r_;
  YAML::Node node_;
  std::string path_;
  std::map<std::string, YAML::Mark> keys_;
  std::set<std::string> used_;
};

void read_dataset(Section& s, DatasetSpec& d) {
  s.get_enum("kind", d.kind, kDatasetNames, true);
  s.get("name", d.name);
  std::string images = d.images.string(), labels = d.labels.string();
  s.get("images", images);
  s.get("labels", labels);
  d.images = images;
  d.labels = labels;
  s.get("max_samples", d.max_samples);
  s.get("classes", d.classes);
  s.get("dims", d.dims);
  s.get("samples", d.samples);
  s.get("mean_low", d.tabular.mean_low);
  s.get("mean_high", d.tabular.mean_high);
  s.get("noise", d.tabular.noise);
}

void read_partition(Section& s, PartitionConfig& p) {
  s.get_enum("mode", p.mode, kModeNames);
  s.get("alpha", p.alpha);
  s.get("test_fraction", p.test_fraction);
  s.get("val_fraction", p.val_fraction);
}

void read_federation(Section& s, FederationConfig& f) {
  s.get("nodes", f.n_nodes);
  s.get_enum("topology", f.topology, kTopologyNames);
  if (auto adj = s.child("adjacency"); adj.IsDefined() && !adj.IsNull()) {
    if (!adj.IsSequence()) {
      s.reader().error(adj.Mark(), s.field("adjacency"), "expected a list of neighbour lists");
    } else {
      f.adjacency.clear();
      for (std::size_t i = 0; i < adj.size(); ++i) {
        std::vector<int> row;
        s.convert_list(adj[i], s.field("adjacency") + "[" + std::to_string(i) + "]", row);
        f.adjacency.push_back(std::move(row));
      }
    }
  }
  s.get("rounds", f.rounds);
  if (auto na = s.child("node_aggregators"); na.IsDefined() && !na.IsNull()) {
    if (!na.IsMap()) {
      s.reader().error(na.Mark(), s.field("node_aggregators"), "expected a mapping of node id to aggregator");
    } else {
      for (auto it = na.begin(); it != na.end(); ++it) {
        const std::string f_name = s.field("node_aggregators") + "." + it->first.Scalar();
        int node = 0;
        std::string kind;
        if (!s.convert(it->first, f_name, node) || !s.convert(it->second, f_name, kind)) continue;
        const auto k = aggregator_from_string(kind);
        if (!k) {
          s.reader().error(it->second.Mark(), f_name,
                           "unknown aggregator '" + kind + "' (expected one of: " + choices(kAggregatorNames) + ")");
          continue;
        }
        if (!f.node_aggregators.emplace(node, *k).second) {
          s.reader().error(it->first.Mark(), f_name, "node listed twice");
        }
      }
    }
  }
  s.get("bandwidth_mbps", f.bandwidth_mbps);
  s.get("delay_ms", f.delay_ms);
  s.get("loss_percent", f.loss_percent);
  s.get("checkpoints", f.checkpoints);
}

void read_aggregator(Section& s, AggregatorConfig& a, bool sentinel_used) {
  s.get_enum("kind", a.kind, kAggregatorNames, true);
  // Sentinel thresholds have no published values, so experiment files must state them.
  const bool need = sentinel_used || a.kind == AggregatorKind::kSentinel;
  s.get("tau_s", a.sentinel.tau_s, need);
  s.get("tau_l", a.sentinel.tau_l, need);
  s.get("l_min", a.sentinel.l_min);
  s.get_enum("norm_ratio", a.sentinel.norm_ratio, kNormNames);
  s.get("trim_k", a.trim_k);
  s.get("krum_f", a.krum_f);
  s.get("krum_m", a.krum_m);
}

void read_train(Section& s, TrainConfig& t) {
  s.get("epochs_per_round", t.epochs_per_round);
  s.get("batch_size", t.batch_size);
  s.get("lr", t.adam.lr);
  s.get("beta1", t.adam.beta1);
  s.get("beta2", t.adam.beta2);
  s.get("eps", t.adam.eps);
}

void read_attack(Section& s, AttackConfig& a) {
  s.get_enum("kind", a.kind, kAttackNames);
  s.get("pnr", a.pnr);
  s.get("nr", a.nr);
  s.get("amplitude", a.amplitude);
  s.get("source", a.source);
  s.get("target", a.target);
  s.get("poison_fraction", a.poison_fraction);
  s.get("observer", a.observer);
  Section t(s.reader(), s.child("trigger"), s.field("trigger"));
  t.get_enum("kind", a.trigger.kind, kTriggerNames);
  t.get("size", a.trigger.size);
  t.get_enum("corner", a.trigger.corner, kCornerNames);
  t.get("k", a.trigger.k);
}

bool finite(double x) { return std::isfinite(x); }

std::vector<Issue> check(const ExperimentConfig& c) {
  std::vector<Issue> out;
  auto need = [&](bool ok, const char* field, const std::string& msg) {
    if (!ok) out.push_back({field, msg});
  };
  need(!c.name.empty(), "name", "must not be empty");
  need(c.repeats >= 1, "repeats", "must be at least 1");
  need(c.threads >= 1, "threads", "must be at least 1");

  const auto& d = c.dataset;
  need(d.max_samples >= 0, "dataset.max_samples", "must be >= 0");
  if (d.kind == DatasetKind::kIdx) {
    need(!d.images.empty(), "dataset.images", "required for idx datasets");
    need(!d.labels.empty(), "dataset.labels", "required for idx datasets");
  } else {
    need(d.classes >= 2, "dataset.classes", "must be at least 2");
    need(d.dims >= 1, "dataset.dims", "must be at least 1");
    need(d.samples >= 1, "dataset.samples", "must be at least 1");
    need(finite(d.tabular.noise) && d.tabular.noise >= 0, "dataset.noise", "must be a finite value >= 0");
    need(finite(d.tabular.mean_low) && finite(d.tabular.mean_high) && d.tabular.mean_low <= d.tabular.mean_high,
         "dataset.mean_high", "must be finite and >= dataset.mean_low");
  }

  const auto& p = c.partition;
  need(finite(p.alpha) && p.alpha > 0, "partition.alpha", "must be > 0");
  need(p.test_fraction > 0 && p.test_fraction < 1, "partition.test_fraction", "must lie in (0, 1)");
  need(p.val_fraction > 0 && p.val_fraction < 1, "partition.val_fraction", "must lie in (0, 1)");

  const auto& f = c.federation;
  need(f.n_nodes >= 1, "federation.nodes", "must be at least 1");
  need(f.rounds >= 0, "federation.rounds", "must be >= 0");
  need(finite(f.bandwidth_mbps) && f.bandwidth_mbps >= 0, "federation.bandwidth_mbps", "must be >= 0");
  need(finite(f.delay_ms) && f.delay_ms >= 0, "federation.delay_ms", "must be >= 0");
  need(f.loss_percent >= 0 && f.loss_percent <= 100, "federation.loss_percent", "must lie in [0, 100]");
  if (f.topology != Topology::kCustom && !f.adjacency.empty()) {
    out.push_back({"federation.adjacency", "only allowed with topology: custom"});
  }
  if (f.n_nodes >= 1) {
    try {
      build_adjacency(f);
    } catch (const std::exception& e) {
      out.push_back({"federation.adjacency", e.what()});
    }
    for (const auto& [node, kind] : f.node_aggregators) {
      need(node >= 0 && node < f.n_nodes, "federation.node_aggregators",
           "node " + std::to_string(node) + " is outside [0, nodes)");
    }
  }

  const auto& a = f.aggregator;
  need(finite(a.sentinel.tau_s), "aggregator.tau_s", "must be finite");
  need(a.sentinel.tau_l >= 0 && a.sentinel.tau_l <= 1, "aggregator.tau_l", "must lie in [0, 1]");
  need(finite(a.sentinel.l_min) && a.sentinel.l_min > 0, "aggregator.l_min", "must be > 0");
  need(!a.trim_k || *a.trim_k >= 0, "aggregator.trim_k", "must be >= 0");
  need(!a.krum_f || *a.krum_f >= 0, "aggregator.krum_f", "must be >= 0");
  need(a.krum_m >= 1, "aggregator.krum_m", "must be at least 1");

  for (int h : c.hidden_dims) need(h >= 1, "model.hidden_dims", "every layer width must be at least 1");

  const auto& t = c.train;
  need(t.epochs_per_round >= 1, "train.epochs_per_round", "must be at least 1");
  need(t.batch_size >= 1, "train.batch_size", "must be at least 1");
  need(finite(t.adam.lr) && t.adam.lr >= 0, "train.lr", "must be >= 0");
  need(t.adam.beta1 >= 0 && t.adam.beta1 < 1, "train.beta1", "must lie in [0, 1)");
  need(t.adam.beta2 >= 0 && t.adam.beta2 < 1, "train.beta2", "must lie in [0, 1)");
  need(finite(t.adam.eps) && t.adam.eps > 0, "train.eps", "must be > 0");

  const auto& k = c.attack;
  need(k.pnr >= 0 && k.pnr <= 1, "attack.pnr", "must lie in [0, 1]");
  need(k.nr >= 0 && k.nr <= 1, "attack.nr", "must lie in [0, 1]");
  need(finite(k.amplitude), "attack.amplitude", "must be finite");
  need(k.poison_fraction >= 0 && k.poison_fraction <= 1, "attack.poison_fraction", "must lie in [0, 1]");
  const int classes = d.kind == DatasetKind::kSyntheticTabular ? d.classes : 10;
  need(k.source >= 0 && k.source < classes, "attack.source", "must be a valid class label");
  need(k.target >= 0 && k.target < classes, "attack.target", "must be a valid class label");
  if (k.kind == AttackKind::kLabelFlipTargeted) {
    need(k.source != k.target, "attack.target", "must differ from attack.source");
  }
  need(!k.observer || (*k.observer >= 0 && *k.observer < f.n_nodes), "attack.observer",
       "must be a node id in [0, nodes)");
  need(k.trigger.size >= 1, "attack.trigger.size", "must be at least 1");
  need(k.trigger.k >= 1, "attack.trigger.k", "must be at least 1");
  if (k.kind == AttackKind::kBackdoor) {
    if (d.kind == DatasetKind::kSyntheticTabular) {
      need(k.trigger.kind == TriggerKind::kTabularOnes, "attack.trigger.kind",
           "tabular datasets need the tabular_ones trigger");
      need(k.trigger.k <= d.dims, "attack.trigger.k", "exceeds dataset.dims");
    } else {
      need(k.trigger.kind == TriggerKind::kImageX, "attack.trigger.kind", "image datasets need the image_x trigger");
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  // Keep floats recognisable as floats.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

// Returns the dotted keys that were assigned.
std::vector<std::string> apply_overrides(YAML::Node& root, std::span<const std::string> overrides) {
  std::vector<std::string> errors, assigned;
  if (!root.IsDefined() || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      errors.push_back("--set " + o + ": expected key=value");
      continue;
    }
    std::vector<std::string> path;
    std::stringstream keys(o.substr(0, eq));
    for (std::string k; std::getline(keys, k, '.');) path.push_back(k);
    YAML::Node value;
    try {
      value = YAML::Load(o.substr(eq + 1));
    } catch (const YAML::ParserException& e) {
      errors.push_back("--set " + o + ": " + e.msg);
      continue;
    }
    YAML::Node cur;
    cur.reset(root);
    bool ok = true;
    for (std::size_t i = 0; i + 1 < path.size() && ok; ++i) {
      if (!cur.IsMap()) {
        ok = false;
        break;
      }
      YAML::Node next = cur[path[i]];
      if (!next.IsDefined() || next.IsNull()) cur[path[i]] = YAML::Node(YAML::NodeType::Map);
      YAML::Node child = cur[path[i]];
      cur.reset(child);
    }
    if (!ok || !cur.IsMap()) {
      errors.push_back("--set " + o + ": " + o.substr(0, eq) + " does not name a mapping entry");
      continue;
    }
    cur[path.back()] = value;
    assigned.push_back(o.substr(0, eq));
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return assigned;
}

}  // namespace

std::string_view to_string(AttackKind kind) { return name_of(kAttackNames, kind); }
std::string_view to_string(PartitionMode mode) { return name_of(kModeNames, mode); }

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& i : check(cfg)) out.push_back(i.field + ": " + i.message);
  return out;
}

ExperimentConfig parse_config_string(std::string_view text, const std::string& source,
                                     std::span<const std::string> overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    std::ostringstream s;
    s << source << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
    throw ConfigError({s.str()});
  }
  std::vector<std::string> overridden;
  if (!overrides.empty()) overridden = apply_overrides(root, overrides);

  ExperimentConfig cfg;
  Reader r(source, std::move(overridden));
  {
    Section top(r, root, "");
    if (!root.IsDefined() || root.IsNull()) r.error("<root>", "empty configuration");
    top.get("name", cfg.name);
    top.get("seed", cfg.seed, true);
    top.get("repeats", cfg.repeats);
    top.get("threads", cfg.threads);
    std::string out_dir = cfg.output_dir.string();
    top.get("output_dir", out_dir);
    cfg.output_dir = out_dir;
    top.get_enum("f1", cfg.f1, kF1Names);
    {
      Section s(r, top.child("dataset"), "dataset");
      if (!top.has("dataset")) r.error(top.mark(), "dataset", "missing required key");
      read_dataset(s, cfg.dataset);
    }
    {
      Section s(r, top.child("partition"), "partition");
      read_partition(s, cfg.partition);
    }
    {
      Section s(r, top.child("federation"), "federation");
      read_federation(s, cfg.federation);
    }
    {
      bool sentinel_used = false;
      for (const auto& [node, kind] : cfg.federation.node_aggregators) {
        sentinel_used = sentinel_used || kind == AggregatorKind::kSentinel;
      }
      Section s(r, top.child("aggregator"), "aggregator");
      if (!top.has("aggregator")) r.error(top.mark(), "aggregator", "missing required key");
      read_aggregator(s, cfg.federation.aggregator, sentinel_used);
    }
    {
      Section s(r, top.child("model"), "model");
      if (auto h = s.child("hidden_dims"); h.IsDefined()) {
        if (h.IsNull()) {
          cfg.hidden_dims.clear();
        } else {
          s.convert_list(h, "model.hidden_dims", cfg.hidden_dims);
        }
      }
    }
    {
      Section s(r, top.child("train"), "train");
      read_train(s, cfg.train);
    }
    {
      Section s(r, top.child("attack"), "attack");
      read_attack(s, cfg.attack);
    }
  }
  // fields that failed to read hold defaults; checking them would only add noise
  for (const auto& i : check(cfg)) {
    if (!r.failed(i.field)) r.error(i.field, i.message);
  }
  if (!r.errors().empty()) throw ConfigError(std::move(r.errors()));
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open file"});
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_string(text.str(), path.string(), overrides);
}

std::string dump_config(const ExperimentConfig& c) {
  YAML::Emitter e;
  auto num = [&](const char* key, double v) { e << YAML::Key << key << YAML::Value << fmt(v); };
  auto flow_ints = [&](const std::vector<int>& v) {
    e << YAML::Flow << YAML::BeginSeq;
    for (int x : v) e << x;
    e << YAML::EndSeq;
  };

  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << c.name;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "repeats" << YAML::Value << c.repeats;
  e << YAML::Key << "threads" << YAML::Value << c.threads;
  e << YAML::Key << "output_dir" << YAML::Value << YAML::DoubleQuoted << c.output_dir.string();
  e << YAML::Key << "f1" << YAML::Value << std::string(name_of(kF1Names, c.f1));

  const auto& d = c.dataset;
  e << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << std::string(name_of(kDatasetNames, d.kind));
  e << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << d.name;
  e << YAML::Key << "images" << YAML::Value << YAML::DoubleQuoted << d.images.string();
  e << YAML::Key << "labels" << YAML::Value << YAML::DoubleQuoted << d.labels.string();
  e << YAML::Key << "max_samples" << YAML::Value << d.max_samples;
  e << YAML::Key << "classes" << YAML::Value << d.classes;
  e << YAML::Key << "dims" << YAML::Value << d.dims;
  e << YAML::Key << "samples" << YAML::Value << d.samples;
  num("mean_low", d.tabular.mean_low);
  num("mean_high", d.tabular.mean_high);
  num("noise", d.tabular.noise);
  e << YAML::EndMap;

  const auto& p = c.partition;
  e << YAML::Key << "partition" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "mode" << YAML::Value << std::string(name_of(kModeNames, p.mode));
  num("alpha", p.alpha);
  num("test_fraction", p.test_fraction);
  num("val_fraction", p.val_fraction);
  e << YAML::EndMap;

  const auto& f = c.federation;
  e << YAML::Key << "federation" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "nodes" << YAML::Value << f.n_nodes;
  e << YAML::Key << "topology" << YAML::Value << std::string(name_of(kTopologyNames, f.topology));
  if (!f.adjacency.empty()) {
    e << YAML::Key << "adjacency" << YAML::Value << YAML::BeginSeq;
    for (const auto& row : f.adjacency) flow_ints(row);
    e << YAML::EndSeq;
  }
  e << YAML::Key << "rounds" << YAML::Value << f.rounds;
  if (!f.node_aggregators.empty()) {
    e << YAML::Key << "node_aggregators" << YAML::Value << YAML::BeginMap;
    for (const auto& [node, kind] : f.node_aggregators) {
      e << YAML::Key << node << YAML::Value << std::string(to_string(kind));
    }
    e << YAML::EndMap;
  }
  num("bandwidth_mbps", f.bandwidth_mbps);
  num("delay_ms", f.delay_ms);
  num("loss_percent", f.loss_percent);
  e << YAML::Key << "checkpoints" << YAML::Value << f.checkpoints;
  e << YAML::EndMap;

  const auto& a = f.aggregator;
  e << YAML::Key << "aggregator" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << std::string(to_string(a.kind));
  num("tau_s", a.sentinel.tau_s);
  num("tau_l", a.sentinel.tau_l);
  num("l_min", a.sentinel.l_min);
  e << YAML::Key << "norm_ratio" << YAML::Value << std::string(name_of(kNormNames, a.sentinel.norm_ratio));
  if (a.trim_k) e << YAML::Key << "trim_k" << YAML::Value << *a.trim_k;
  if (a.krum_f) e << YAML::Key << "krum_f" << YAML::Value << *a.krum_f;
  e << YAML::Key << "krum_m" << YAML::Value << a.krum_m;
  e << YAML::EndMap;

  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "hidden_dims" << YAML::Value;
  flow_ints(c.hidden_dims);
  e << YAML::EndMap;

  const auto& t = c.train;
  e << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "epochs_per_round" << YAML::Value << t.epochs_per_round;
  e << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  num("lr", t.adam.lr);
  num("beta1", t.adam.beta1);
  num("beta2", t.adam.beta2);
  num("eps", t.adam.eps);
  e << YAML::EndMap;

  const auto& k = c.attack;
  e << YAML::Key << "attack" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << std::string(name_of(kAttackNames, k.kind));
  num("pnr", k.pnr);
  num("nr", k.nr);
  num("amplitude", k.amplitude);
  e << YAML::Key << "source" << YAML::Value << k.source;
  e << YAML::Key << "target" << YAML::Value << k.target;
  num("poison_fraction", k.poison_fraction);
  if (k.observer) e << YAML::Key << "observer" << YAML::Value << *k.observer;
  e << YAML::Key << "trigger" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << std::string(name_of(kTriggerNames, k.trigger.kind));
  e << YAML::Key << "size" << YAML::Value << k.trigger.size;
  e << YAML::Key << "corner" << YAML::Value << std::string(name_of(kCornerNames, k.trigger.corner));
  e << YAML::Key << "k" << YAML::Value << k.trigger.k;
  e << YAML::EndMap;
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace dfl
