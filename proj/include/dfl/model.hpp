#pragma once

// Fully-connected ReLU network with a softmax output, trained with Adam.
//
// Parameters are laid out as alternating "fcK.weight" (out x in) and
// "fcK.bias" (out) layers, matching the usual framework convention so that
// each weight row belongs to one output unit.

#include <cstdint>
#include <span>
#include <vector>

#include "dfl/data.hpp"
#include "dfl/metrics.hpp"
#include "dfl/params.hpp"

namespace dfl {

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int num_classes = 0;

  void validate() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct TrainConfig {
  int epochs_per_round = 3;
  int batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;  // shuffle stream for this call
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Uniform weights in +-sqrt(6 / fan_in), zero biases.
LayeredParams init_params(const MlpSpec& spec, std::uint64_t seed);

/// Recovers the architecture from a parameter set; throws ShapeError if the
/// layers do not form a weight/bias chain.
MlpSpec infer_spec(const LayeredParams& params);

/// Row-wise class probabilities for a batch (rows = samples).
template <typename Scalar>
RowMatrix<Scalar> forward(const BasicLayeredParams<Scalar>& params, const RowMatrix<Scalar>& batch);

template <typename Scalar>
struct LossAndGrad {
  double loss = 0.0;  // mean categorical cross-entropy
  BasicLayeredParams<Scalar> grads;
};

template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const BasicLayeredParams<Scalar>& params, const RowMatrix<Scalar>& batch,
                                  std::span<const int> labels);

/// Mean cross-entropy over a labelled batch, without gradients.
template <typename Scalar>
double mean_loss(const BasicLayeredParams<Scalar>& params, const RowMatrix<Scalar>& batch,
                 std::span<const int> labels);

/// Runs `cfg.epochs_per_round` epochs of mini-batch Adam from fresh optimizer
/// state. `epoch_losses`, if given, receives the mean training loss of each epoch.
LayeredParams train_local(const LayeredParams& params, const Dataset& data, const TrainConfig& cfg,
                          std::vector<double>* epoch_losses = nullptr);

struct Evaluation {
  double mean_loss = 0.0;
  ConfusionMatrix confusion;
};

Evaluation evaluate(const LayeredParams& params, const Dataset& data);

/// Mean cross-entropy of `params` on `data` (the bootstrap loss).
double dataset_loss(const LayeredParams& params, const Dataset& data);

}  // namespace dfl
