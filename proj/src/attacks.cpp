#include "dfl/attacks.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dfl/random.hpp"

namespace dfl {
namespace {

void check_ratio(double r, const char* what) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

// Uniform subset of {0..n-1} of size k, returned sorted.
std::vector<std::size_t> choose(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(k);
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

std::pair<int, int> trigger_origin(const Trigger& t, const ImageShape& img) {
  switch (t.corner) {
    case Corner::kTopLeft: return {0, 0};
    case Corner::kTopRight: return {0, img.width - t.size};
    case Corner::kBottomLeft: return {img.height - t.size, 0};
    case Corner::kBottomRight: return {img.height - t.size, img.width - t.size};
    case Corner::kCenter: return {(img.height - t.size) / 2, (img.width - t.size) / 2};
  }
  return {0, 0};
}

void check_trigger(const Trigger& t, const Dataset& ds) {
  if (t.kind == TriggerKind::kImageX) {
    if (!ds.image) throw std::invalid_argument("image trigger on a tabular dataset");
    if (t.size < 1 || t.size > ds.image->height || t.size > ds.image->width) {
      throw std::invalid_argument("trigger size exceeds image bounds");
    }
  } else if (t.k < 1 || t.k > ds.dims()) {
    throw std::invalid_argument("tabular trigger width exceeds feature count");
  }
}

}  // namespace

std::vector<int> select_malicious(int n_nodes, double pnr, std::uint64_t seed, std::optional<int> observer) {
  check_ratio(pnr, "pnr");
  std::vector<int> pool;
  for (int i = 0; i < n_nodes; ++i) {
    if (!observer || *observer != i) pool.push_back(i);
  }
  const auto want = static_cast<std::size_t>(std::lround(pnr * n_nodes));
  const auto k = std::min(want, pool.size());
  Rng rng(seed);
  std::vector<int> out;
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), k, rng);
  return out;
}

LayeredParams poison_model(const LayeredParams& p, double nr, double amplitude, std::uint64_t seed) {
  check_ratio(nr, "nr");
  const auto total = static_cast<std::size_t>(p.num_scalars());
  const auto count = static_cast<std::size_t>(std::lround(nr * static_cast<double>(total)));
  Rng rng(seed);
  const auto picks = choose(total, count, rng);

  // Map flat positions back to (layer, offset); picks are sorted.
  std::vector<std::size_t> layer_start;
  std::size_t acc = 0;
  for (const auto& l : p) {
    layer_start.push_back(acc);
    acc += static_cast<std::size_t>(l.values.size());
  }
  LayeredParams out = p;
  std::bernoulli_distribution sign(0.5);
  const auto salt = static_cast<float>(amplitude);
  std::size_t layer = 0;
  for (auto pos : picks) {
    while (layer + 1 < layer_start.size() && pos >= layer_start[layer + 1]) ++layer;
    out[layer].values.data()[pos - layer_start[layer]] = sign(rng) ? salt : -salt;
  }
  return out;
}

Dataset flip_labels_untargeted(const Dataset& ds, std::uint64_t seed) {
  if (ds.num_classes < 2) throw std::invalid_argument("label flipping needs at least two classes");
  Dataset out = ds;
  Rng rng(seed);
  std::uniform_int_distribution<int> other(0, ds.num_classes - 2);
  for (auto& y : out.labels) {
    const int r = other(rng);
    y = r >= y ? r + 1 : r;
  }
  return out;
}

Dataset flip_labels_targeted(const Dataset& ds, int src, int target) {
  if (src == target) throw std::invalid_argument("targeted flip needs src != target");
  if (target < 0 || target >= ds.num_classes) throw std::invalid_argument("target label out of range");
  Dataset out = ds;
  bool touched = false;
  for (auto& y : out.labels) {
    if (y == src) {
      y = target;
      touched = true;
    }
  }
  if (!touched) spdlog::warn("targeted label flip: source label {} not present, dataset unchanged", src);
  return out;
}

void apply_trigger(Eigen::Ref<RowMatrix<float>> row, const Trigger& trigger, const std::optional<ImageShape>& image) {
  if (trigger.kind == TriggerKind::kTabularOnes) {
    row.leftCols(trigger.k).setOnes();
    return;
  }
  const auto [r0, c0] = trigger_origin(trigger, *image);
  for (int i = 0; i < trigger.size; ++i) {
    row(0, (r0 + i) * image->width + c0 + i) = 1.0F;
    row(0, (r0 + i) * image->width + c0 + trigger.size - 1 - i) = 1.0F;
  }
}

Dataset implant_backdoor(const Dataset& ds, const Trigger& trigger, int target, double fraction,
                         std::uint64_t seed) {
  check_ratio(fraction, "poison fraction");
  check_trigger(trigger, ds);
  if (target < 0 || target >= ds.num_classes) throw std::invalid_argument("backdoor target out of range");
  Dataset out = ds;
  const auto n = static_cast<std::size_t>(ds.size());
  const auto count = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  Rng rng(seed);
  for (auto i : choose(n, count, rng)) {
    apply_trigger(out.features.row(static_cast<Eigen::Index>(i)), trigger, ds.image);
    out.labels[i] = target;
  }
  return out;
}

Dataset build_backdoor_eval_set(const Dataset& test, const Trigger& trigger, int target) {
  if (test.empty()) throw std::invalid_argument("backdoor evaluation set needs a nonempty test set");
  check_trigger(trigger, test);
  if (target < 0 || target >= test.num_classes) throw std::invalid_argument("backdoor target out of range");
  Dataset out = test;
  for (Eigen::Index i = 0; i < out.size(); ++i) apply_trigger(out.features.row(i), trigger, test.image);
  return out;
}

}  // namespace dfl
