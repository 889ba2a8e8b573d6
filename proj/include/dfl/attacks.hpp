#pragma once

// Poisoning behaviours injected into malicious nodes.

#include <cstdint>
#include <optional>
#include <vector>

#include "dfl/data.hpp"
#include "dfl/params.hpp"

namespace dfl {

enum class AttackKind { kNone, kModelPoison, kLabelFlipUntargeted, kLabelFlipTargeted, kBackdoor };

enum class Corner { kTopLeft, kTopRight, kBottomLeft, kBottomRight, kCenter };

enum class TriggerKind { kImageX, kTabularOnes };

struct Trigger {
  TriggerKind kind = TriggerKind::kImageX;
  int size = 5;                     // image_x: side of the square holding the X
  Corner corner = Corner::kTopLeft;  // image_x placement
  int k = 7;                        // tabular_ones: number of leading dims set to 1
  friend bool operator==(const Trigger&, const Trigger&) = default;
};

struct AttackConfig {
  AttackKind kind = AttackKind::kNone;
  double pnr = 0.0;            // poisoned node ratio
  double nr = 0.8;             // noise ratio (model poisoning)
  double amplitude = 1.0;      // salt magnitude (model poisoning)
  int source = 0;              // targeted label flip
  int target = 0;              // targeted label flip and backdoor
  Trigger trigger;
  double poison_fraction = 0.2;  // backdoor training implant
  std::optional<int> observer;   // node never selected as malicious
  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

/// round(pnr * n_nodes) distinct ids, sorted ascending.
std::vector<int> select_malicious(int n_nodes, double pnr, std::uint64_t seed,
                                  std::optional<int> observer = std::nullopt);

/// Replaces exactly round(nr * total) scalars with +-amplitude (random sign).
LayeredParams poison_model(const LayeredParams& p, double nr, double amplitude, std::uint64_t seed);

/// Every label replaced by a uniform draw from the other classes.
Dataset flip_labels_untargeted(const Dataset& ds, std::uint64_t seed);

/// Every `src` label becomes `target`. A dataset without `src` is returned
/// unchanged (with a warning).
Dataset flip_labels_targeted(const Dataset& ds, int src, int target);

/// Writes the trigger pattern into one feature row.
void apply_trigger(Eigen::Ref<RowMatrix<float>> row, const Trigger& trigger, const std::optional<ImageShape>& image);

/// Triggers a uniformly chosen round(fraction * n) samples and relabels them `target`.
Dataset implant_backdoor(const Dataset& ds, const Trigger& trigger, int target, double fraction,
                         std::uint64_t seed);

/// Triggers every sample; labels keep their original values.
Dataset build_backdoor_eval_set(const Dataset& test, const Trigger& trigger, int target);

}  // namespace dfl
