#include "dfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <type_traits>

#include "dfl/random.hpp"

namespace dfl {
namespace {

std::size_t num_dense_layers(const auto& params) {
  if (params.empty() || params.size() % 2 != 0) {
    throw ShapeError("MLP parameters must alternate weight and bias layers");
  }
  const std::size_t n = params.size() / 2;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& w = params[2 * k];
    const auto& b = params[2 * k + 1];
    if (w.kind != LayerKind::kMatrix || b.kind != LayerKind::kVector || b.values.cols() != w.values.rows()) {
      throw ShapeError("malformed dense layer " + std::to_string(k));
    }
    if (k > 0 && w.values.cols() != params[2 * k - 2].values.rows()) {
      throw ShapeError("dense layer " + std::to_string(k) + " input width mismatch");
    }
  }
  return n;
}

// Pre-softmax logits; optionally records the post-ReLU activation of every
// layer input (activations[0] is the batch itself).
template <typename Scalar>
RowMatrix<Scalar> logits(const BasicLayeredParams<Scalar>& params, const RowMatrix<Scalar>& batch,
                         std::type_identity_t<std::vector<RowMatrix<Scalar>>>* activations) {
  const std::size_t n = num_dense_layers(params);
  if (batch.cols() != params[0].values.cols()) {
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                     std::to_string(params[0].values.cols()));
  }
  RowMatrix<Scalar> a = batch;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& w = params[2 * k].values;
    const auto& b = params[2 * k + 1].values;
    RowMatrix<Scalar> z = a * w.transpose();
    z.rowwise() += b.row(0);
    if (activations) activations->push_back(std::move(a));
    if (k + 1 < n) z = z.cwiseMax(Scalar(0));
    a = std::move(z);
  }
  return a;
}

// Row-wise log-softmax with the row max subtracted first.
template <typename Scalar>
RowMatrix<Scalar> log_softmax(const RowMatrix<Scalar>& z) {
  RowMatrix<Scalar> shifted = z.colwise() - z.rowwise().maxCoeff();
  const Vector<Scalar> lse = shifted.array().exp().rowwise().sum().log().matrix();
  shifted.colwise() -= lse;
  return shifted;
}

template <typename Scalar>
double nll(const RowMatrix<Scalar>& log_probs, std::span<const int> labels) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < log_probs.rows(); ++i) {
    sum -= static_cast<double>(log_probs(i, labels[static_cast<std::size_t>(i)]));
  }
  const double loss = sum / static_cast<double>(log_probs.rows());
  if (!std::isfinite(loss)) throw NumericalError("non-finite loss");
  return loss;
}

template <typename Scalar>
void check_labels(const RowMatrix<Scalar>& batch, std::span<const int> labels, Eigen::Index classes) {
  if (static_cast<std::size_t>(batch.rows()) != labels.size()) {
    throw ShapeError("label count does not match batch rows");
  }
  if (labels.empty()) throw std::invalid_argument("empty batch");
  for (int y : labels) {
    if (y < 0 || y >= classes) throw std::out_of_range("label out of range");
  }
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim <= 0) throw std::invalid_argument("MlpSpec: input_dim must be positive");
  if (num_classes < 2) throw std::invalid_argument("MlpSpec: need at least two classes");
  for (int h : hidden_dims) {
    if (h <= 0) throw std::invalid_argument("MlpSpec: hidden widths must be positive");
  }
}

LayeredParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  LayeredParams params;
  int fan_in = spec.input_dim;
  std::vector<int> widths = spec.hidden_dims;
  widths.push_back(spec.num_classes);
  for (std::size_t k = 0; k < widths.size(); ++k) {
    const float bound = static_cast<float>(std::sqrt(6.0 / fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    auto& w = params.add_matrix("fc" + std::to_string(k) + ".weight", widths[k], fan_in);
    for (Eigen::Index i = 0; i < w.values.size(); ++i) w.values.data()[i] = dist(rng);
    params.add_vector("fc" + std::to_string(k) + ".bias", widths[k]);
    fan_in = widths[k];
  }
  return params;
}

MlpSpec infer_spec(const LayeredParams& params) {
  const std::size_t n = num_dense_layers(params);
  MlpSpec spec;
  spec.input_dim = static_cast<int>(params[0].values.cols());
  for (std::size_t k = 0; k + 1 < n; ++k) spec.hidden_dims.push_back(static_cast<int>(params[2 * k].values.rows()));
  spec.num_classes = static_cast<int>(params[2 * n - 2].values.rows());
  return spec;
}

template <typename Scalar>
RowMatrix<Scalar> forward(const BasicLayeredParams<Scalar>& params, const RowMatrix<Scalar>& batch) {
  RowMatrix<Scalar> probs = log_softmax(logits(params, batch, nullptr)).array().exp().matrix();
  if (!probs.allFinite()) throw NumericalError("non-finite activations in forward pass");
  return probs;
}

template <typename Scalar>
double mean_loss(const BasicLayeredParams<Scalar>& params, const RowMatrix<Scalar>& batch,
                 std::span<const int> labels) {
  check_labels(batch, labels, params[params.size() - 1].values.cols());
  return nll(log_softmax(logits(params, batch, nullptr)), labels);
}

template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const BasicLayeredParams<Scalar>& params, const RowMatrix<Scalar>& batch,
                                  std::span<const int> labels) {
  const std::size_t n = num_dense_layers(params);
  check_labels(batch, labels, params[params.size() - 1].values.cols());

  std::vector<RowMatrix<Scalar>> acts;
  acts.reserve(n);
  const RowMatrix<Scalar> log_probs = log_softmax(logits(params, batch, &acts));

  LossAndGrad<Scalar> out;
  out.loss = nll(log_probs, labels);
  out.grads = params;

  // d(mean CE)/d(logits) = (softmax - onehot) / batch_size
  RowMatrix<Scalar> delta = log_probs.array().exp().matrix();
  for (Eigen::Index i = 0; i < delta.rows(); ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= Scalar(1);
  delta /= static_cast<Scalar>(batch.rows());

  for (std::size_t k = n; k-- > 0;) {
    out.grads[2 * k].values.noalias() = delta.transpose() * acts[k];
    out.grads[2 * k + 1].values = delta.colwise().sum();
    if (k == 0) break;
    RowMatrix<Scalar> back = delta * params[2 * k].values;
    // acts[k] is the ReLU output of layer k-1; zero where the unit was inactive.
    delta = (acts[k].array() > Scalar(0)).select(back, Scalar(0));
  }
  for (const auto& g : out.grads) {
    if (!g.values.allFinite()) throw NumericalError("non-finite gradient");
  }
  return out;
}

template RowMatrix<float> forward(const BasicLayeredParams<float>&, const RowMatrix<float>&);
template RowMatrix<double> forward(const BasicLayeredParams<double>&, const RowMatrix<double>&);
template LossAndGrad<float> loss_and_grad(const BasicLayeredParams<float>&, const RowMatrix<float>&,
                                          std::span<const int>);
template LossAndGrad<double> loss_and_grad(const BasicLayeredParams<double>&, const RowMatrix<double>&,
                                           std::span<const int>);
template double mean_loss(const BasicLayeredParams<float>&, const RowMatrix<float>&, std::span<const int>);
template double mean_loss(const BasicLayeredParams<double>&, const RowMatrix<double>&, std::span<const int>);

LayeredParams train_local(const LayeredParams& params, const Dataset& data, const TrainConfig& cfg,
                          std::vector<double>* epoch_losses) {
  if (data.empty()) throw std::invalid_argument("train_local: empty training set");
  if (cfg.epochs_per_round < 1) throw std::invalid_argument("train_local: epochs_per_round must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_local: batch_size must be >= 1");
  if (!(cfg.adam.lr >= 0.0)) throw std::invalid_argument("train_local: negative learning rate");

  LayeredParams theta = params;
  LayeredParams m = params;
  LayeredParams v = params;
  for (auto& l : m) l.values.setZero();
  for (auto& l : v) l.values.setZero();

  const auto lr = static_cast<float>(cfg.adam.lr);
  const auto b1 = static_cast<float>(cfg.adam.beta1);
  const auto b2 = static_cast<float>(cfg.adam.beta2);
  const auto eps = static_cast<float>(cfg.adam.eps);

  const auto n = static_cast<std::size_t>(data.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);

  RowMatrix<float> batch;
  std::vector<int> labels;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs_per_round; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min(n - start, static_cast<std::size_t>(cfg.batch_size));
      batch.resize(static_cast<Eigen::Index>(len), data.dims());
      labels.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(order[start + i]));
        labels[i] = data.labels[order[start + i]];
      }
      const auto lg = loss_and_grad(theta, batch, labels);
      loss_sum += lg.loss * static_cast<double>(len);

      ++step;
      const float c1 = 1.0F - std::pow(b1, static_cast<float>(step));
      const float c2 = 1.0F - std::pow(b2, static_cast<float>(step));
      for (std::size_t l = 0; l < theta.size(); ++l) {
        auto g = lg.grads[l].values.array();
        auto mm = m[l].values.array();
        auto vv = v[l].values.array();
        mm = b1 * mm + (1.0F - b1) * g;
        vv = b2 * vv + (1.0F - b2) * g.square();
        theta[l].values.array() -= lr * (mm / c1) / ((vv / c2).sqrt() + eps);
      }
    }
    if (epoch_losses) epoch_losses->push_back(loss_sum / static_cast<double>(n));
  }
  return theta;
}

namespace {
constexpr Eigen::Index kEvalChunk = 1024;
}

Evaluation evaluate(const LayeredParams& params, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  Evaluation out;
  out.confusion = ConfusionMatrix(data.num_classes);
  double loss_sum = 0.0;
  for (Eigen::Index start = 0; start < data.size(); start += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, data.size() - start);
    const RowMatrix<float> batch = data.features.middleRows(start, len);
    const std::span<const int> labels(data.labels.data() + start, static_cast<std::size_t>(len));
    const RowMatrix<float> lp = log_softmax(logits(params, batch, nullptr));
    check_labels(batch, labels, lp.cols());
    loss_sum += nll(lp, labels) * static_cast<double>(len);
    for (Eigen::Index i = 0; i < len; ++i) {
      Eigen::Index pred = 0;
      lp.row(i).maxCoeff(&pred);
      out.confusion.add(labels[static_cast<std::size_t>(i)], static_cast<int>(pred));
    }
  }
  out.mean_loss = loss_sum / static_cast<double>(data.size());
  return out;
}

double dataset_loss(const LayeredParams& params, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
  double loss_sum = 0.0;
  for (Eigen::Index start = 0; start < data.size(); start += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, data.size() - start);
    const RowMatrix<float> batch = data.features.middleRows(start, len);
    loss_sum += mean_loss(params, batch, std::span<const int>(data.labels.data() + start,
                                                             static_cast<std::size_t>(len))) *
                static_cast<double>(len);
  }
  return loss_sum / static_cast<double>(data.size());
}

}  // namespace dfl
