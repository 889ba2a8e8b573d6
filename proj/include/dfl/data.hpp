#pragma once

// Datasets, federated partitioning and per-node splits.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dfl/errors.hpp"
#include "dfl/params.hpp"

namespace dfl {

struct ImageShape {
  int height = 0;
  int width = 0;
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

struct Dataset {
  RowMatrix<float> features;  // samples x dims
  std::vector<int> labels;
  int num_classes = 0;
  std::optional<ImageShape> image;  // empty for tabular data

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dims() const { return features.cols(); }
  bool empty() const { return features.rows() == 0; }

  /// Throws std::invalid_argument if labels and features disagree.
  void validate() const;
};

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

/// Loads an IDX image/label pair (gzip or raw). Pixels are scaled to [0, 1].
Dataset load_idx_images(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

struct TabularOptions {
  double mean_low = 0.2;   // per-class means drawn uniformly from [mean_low, mean_high]
  double mean_high = 0.8;
  double noise = 0.15;     // isotropic Gaussian standard deviation
};

/// Balanced Gaussian class clusters. Deterministic per seed.
Dataset synth_tabular(int classes, int dims, int samples, std::uint64_t seed, const TabularOptions& options = {});

enum class PartitionMode { kIid, kDirichlet };

struct PartitionConfig {
  PartitionMode mode = PartitionMode::kIid;
  double alpha = 0.5;
  int nodes = 10;
  std::uint64_t seed = 0;
  double test_fraction = 1.0 / 7.0;  // of each node's allocation
  double val_fraction = 0.1;         // of the node's training share
};

/// Row indices into the source dataset. `bootstrap` indexes the source too.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::vector<std::size_t> bootstrap;
};

struct NodeData {
  Dataset train;
  Dataset val;
  Dataset test;
  Dataset bootstrap;
  SplitIndices indices;
};

/// Disjoint per-node allocations of sample indices (before the train/val/test split).
std::vector<std::vector<std::size_t>> allocate_samples(std::span<const int> labels, int num_classes,
                                                       const PartitionConfig& cfg);

std::vector<NodeData> partition(const Dataset& ds, const PartitionConfig& cfg);

/// Bootstrap size for a validation set of n samples: a third of it, at least
/// 300, never more than n.
std::size_t bootstrap_size(std::size_t n);

/// Positions (into a population of n) of a bootstrap draw without replacement.
std::vector<std::size_t> bootstrap_positions(std::size_t n, std::uint64_t seed);

Dataset sample_bootstrap(const Dataset& val, std::uint64_t seed);

/// JSON document mapping node -> sample indices per split.
void write_partition_manifest(std::ostream& out, std::span<const SplitIndices> nodes);

}  // namespace dfl
