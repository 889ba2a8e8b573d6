#include "dfl/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>

#include <json.hpp>

#include "dfl/random.hpp"

namespace dfl {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct GzCloser {
  void operator()(gzFile f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

GzHandle open_gz(const std::filesystem::path& path) {
  GzHandle f(gzopen(path.c_str(), "rb"));
  if (!f) throw FormatError("cannot open " + path.string());
  return f;
}

void read_exact(gzFile f, void* dst, std::size_t n, const std::filesystem::path& path) {
  auto* out = static_cast<unsigned char*>(dst);
  while (n > 0) {
    const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1U << 30));
    const int got = gzread(f, out, chunk);
    if (got <= 0) throw FormatError("truncated IDX file " + path.string());
    out += got;
    n -= static_cast<std::size_t>(got);
  }
}

std::uint32_t read_be32(gzFile f, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  read_exact(f, b.data(), b.size(), path);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void check_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& path) {
  if (got != want) {
    throw FormatError("bad IDX magic number in " + path.string());
  }
}

// Deals `quota[k]` consecutive items from `items` to node k.
void deal(std::span<const std::size_t> items, std::span<const std::size_t> quota,
          std::vector<std::vector<std::size_t>>& out) {
  std::size_t pos = 0;
  for (std::size_t k = 0; k < quota.size(); ++k) {
    out[k].insert(out[k].end(), items.begin() + static_cast<std::ptrdiff_t>(pos),
                  items.begin() + static_cast<std::ptrdiff_t>(pos + quota[k]));
    pos += quota[k];
  }
}

// Integer counts summing to `total` proportional to `shares` (largest remainder).
std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> shares) {
  std::vector<std::size_t> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < shares.size(); ++k) {
    const double q = static_cast<double>(total) * shares[k];
    counts[k] = static_cast<std::size_t>(std::floor(q));
    assigned += counts[k];
    remainders.emplace_back(q - std::floor(q), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];
  return counts;
}

std::vector<std::vector<std::size_t>> by_class(std::span<const int> labels, int num_classes) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw std::invalid_argument("dataset: feature rows and label count differ");
  }
  if (num_classes < 2) throw std::invalid_argument("dataset: need at least two classes");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw std::invalid_argument("dataset: label out of range");
  }
  if (image && static_cast<Eigen::Index>(image->height) * image->width != features.cols()) {
    throw std::invalid_argument("dataset: image shape does not match feature width");
  }
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.image = ds.image;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), ds.dims());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(ds.labels[indices[i]]);
  }
  return out;
}

Dataset load_idx_images(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  auto images = open_gz(images_path);
  check_magic(read_be32(images.get(), images_path), kIdxImagesMagic, images_path);
  const std::uint32_t n = read_be32(images.get(), images_path);
  const std::uint32_t rows = read_be32(images.get(), images_path);
  const std::uint32_t cols = read_be32(images.get(), images_path);

  auto labels = open_gz(labels_path);
  check_magic(read_be32(labels.get(), labels_path), kIdxLabelsMagic, labels_path);
  const std::uint32_t n_labels = read_be32(labels.get(), labels_path);
  if (n_labels != n) {
    throw FormatError("IDX count mismatch: " + std::to_string(n) + " images, " + std::to_string(n_labels) +
                      " labels");
  }

  const std::size_t dims = std::size_t{rows} * cols;
  std::vector<unsigned char> pixels(std::size_t{n} * dims);
  read_exact(images.get(), pixels.data(), pixels.size(), images_path);
  std::vector<unsigned char> raw_labels(n);
  read_exact(labels.get(), raw_labels.data(), raw_labels.size(), labels_path);

  Dataset ds;
  ds.image = ImageShape{static_cast<int>(rows), static_cast<int>(cols)};
  ds.features = Eigen::Map<const RowMatrix<unsigned char>>(pixels.data(), n, static_cast<Eigen::Index>(dims))
                    .cast<float>() /
                255.0F;
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  const int max_label = raw_labels.empty() ? 0 : *std::max_element(raw_labels.begin(), raw_labels.end());
  ds.num_classes = std::max(2, max_label + 1);
  return ds;
}

Dataset synth_tabular(int classes, int dims, int samples, std::uint64_t seed, const TabularOptions& options) {
  if (classes < 2) throw std::invalid_argument("synth_tabular: need at least two classes");
  if (dims < 1 || samples < classes) throw std::invalid_argument("synth_tabular: bad dims or sample count");

  Rng mean_rng(derive_seed(seed, {0x6D65616EULL}));
  std::uniform_real_distribution<double> mean_dist(options.mean_low, options.mean_high);
  RowMatrix<double> means(classes, dims);
  for (Eigen::Index i = 0; i < means.size(); ++i) means.data()[i] = mean_dist(mean_rng);

  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(samples));
  for (int c = 0; c < classes; ++c) {
    const int count = samples / classes + (c < samples % classes ? 1 : 0);
    labels.insert(labels.end(), static_cast<std::size_t>(count), c);
  }
  Rng rng(derive_seed(seed, {0x73616D70ULL}));
  std::shuffle(labels.begin(), labels.end(), rng);

  Dataset ds;
  ds.num_classes = classes;
  ds.features.resize(samples, dims);
  std::normal_distribution<double> noise(0.0, options.noise);
  for (int i = 0; i < samples; ++i) {
    for (int d = 0; d < dims; ++d) {
      ds.features(i, d) = static_cast<float>(means(labels[static_cast<std::size_t>(i)], d) + noise(rng));
    }
  }
  ds.labels = std::move(labels);
  return ds;
}

std::vector<std::vector<std::size_t>> allocate_samples(std::span<const int> labels, int num_classes,
                                                       const PartitionConfig& cfg) {
  if (cfg.nodes < 1) throw std::invalid_argument("partition: need at least one node");
  const auto nodes = static_cast<std::size_t>(cfg.nodes);
  if (labels.size() < nodes * static_cast<std::size_t>(num_classes)) {
    throw InsufficientData("partition: " + std::to_string(labels.size()) + " samples cannot give " +
                           std::to_string(cfg.nodes) + " nodes " + std::to_string(num_classes) + " each");
  }
  Rng rng(derive_seed(cfg.seed, {0x616C6C6FULL}));
  auto classes = by_class(labels, num_classes);
  for (auto& c : classes) std::shuffle(c.begin(), c.end(), rng);

  std::vector<std::vector<std::size_t>> out(nodes);
  if (cfg.mode == PartitionMode::kIid) {
    // Round-robin over the class-ordered list: per-class counts differ by at most one.
    std::size_t k = 0;
    for (const auto& c : classes) {
      for (auto idx : c) out[k++ % nodes].push_back(idx);
    }
    return out;
  }

  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("partition: dirichlet alpha must be positive");
  std::gamma_distribution<double> gamma(cfg.alpha, 1.0);
  const std::size_t min_size = static_cast<std::size_t>(num_classes);
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    for (auto& o : out) o.clear();
    for (const auto& c : classes) {
      std::vector<double> shares(nodes);
      double sum = 0.0;
      while (sum <= 0.0) {
        sum = 0.0;
        for (auto& s : shares) sum += (s = gamma(rng));
      }
      for (auto& s : shares) s /= sum;
      deal(c, largest_remainder(c.size(), shares), out);
    }
    if (std::all_of(out.begin(), out.end(), [&](const auto& o) { return o.size() >= min_size; })) return out;
  }
  throw InsufficientData("partition: could not draw a Dirichlet allocation giving every node " +
                         std::to_string(min_size) + " samples");
}

std::size_t bootstrap_size(std::size_t n) {
  const std::size_t third = (n + 2) / 3;
  return std::min(n, std::max<std::size_t>(third, 300));
}

std::vector<std::size_t> bootstrap_positions(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> out;
  Rng rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(out), bootstrap_size(n), rng);
  return out;
}

Dataset sample_bootstrap(const Dataset& val, std::uint64_t seed) {
  const auto pos = bootstrap_positions(static_cast<std::size_t>(val.size()), seed);
  return subset(val, pos);
}

std::vector<NodeData> partition(const Dataset& ds, const PartitionConfig& cfg) {
  ds.validate();
  auto allocations = allocate_samples(ds.labels, ds.num_classes, cfg);
  std::vector<NodeData> nodes;
  nodes.reserve(allocations.size());
  for (std::size_t k = 0; k < allocations.size(); ++k) {
    auto& alloc = allocations[k];
    Rng rng(derive_seed(cfg.seed, {0x73706C74ULL, k}));
    std::shuffle(alloc.begin(), alloc.end(), rng);

    const std::size_t n = alloc.size();
    std::size_t n_test = static_cast<std::size_t>(std::lround(static_cast<double>(n) * cfg.test_fraction));
    if (n >= 3) n_test = std::clamp<std::size_t>(n_test, 1, n - 2);
    const std::size_t rest = n - n_test;
    std::size_t n_val = static_cast<std::size_t>(std::lround(static_cast<double>(rest) * cfg.val_fraction));
    if (rest >= 2) n_val = std::clamp<std::size_t>(n_val, 1, rest - 1);

    NodeData node;
    auto it = alloc.begin();
    node.indices.test.assign(it, it + static_cast<std::ptrdiff_t>(n_test));
    it += static_cast<std::ptrdiff_t>(n_test);
    node.indices.val.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
    it += static_cast<std::ptrdiff_t>(n_val);
    node.indices.train.assign(it, alloc.end());
    if (node.indices.train.empty() || node.indices.val.empty() || node.indices.test.empty()) {
      throw InsufficientData("partition: node " + std::to_string(k) + " received too few samples to split");
    }

    for (auto p : bootstrap_positions(node.indices.val.size(), derive_seed(cfg.seed, {0x626F6F74ULL, k}))) {
      node.indices.bootstrap.push_back(node.indices.val[p]);
    }
    node.train = subset(ds, node.indices.train);
    node.val = subset(ds, node.indices.val);
    node.test = subset(ds, node.indices.test);
    node.bootstrap = subset(ds, node.indices.bootstrap);
    nodes.push_back(std::move(node));
  }
  return nodes;
}

void write_partition_manifest(std::ostream& out, std::span<const SplitIndices> nodes) {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto& idx = nodes[k];
    doc["nodes"].push_back({{"node", k},
                            {"train", idx.train},
                            {"val", idx.val},
                            {"test", idx.test},
                            {"bootstrap", idx.bootstrap}});
  }
  out << doc.dump() << '\n';
}

}  // namespace dfl
