#pragma once

// Layered model parameters and the algebra the aggregators are built on.
//
// A parameter set is an ordered list of named layers. Weight matrices keep
// one row per output unit; bias vectors are stored as a single row so that
// every reduction can treat them as a one-row matrix. Storage is row-major,
// which makes flatten() the plain memory order of each layer.
//
// Everything here is templated on the scalar type: float is the training and
// wire precision, double is used by tests that need tight finite-difference
// tolerances. Reductions always accumulate in double.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfl/errors.hpp"

namespace dfl {

enum class LayerKind : std::uint8_t { kMatrix = 0, kVector = 1 };

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Layer {
  std::string name;
  LayerKind kind = LayerKind::kMatrix;
  RowMatrix<Scalar> values;

  bool same_shape(const Layer& other) const {
    return name == other.name && kind == other.kind && values.rows() == other.values.rows() &&
           values.cols() == other.values.cols();
  }

  friend bool operator==(const Layer& a, const Layer& b) {
    return a.same_shape(b) && std::equal(a.values.data(), a.values.data() + a.values.size(),
                                         b.values.data());
  }
};

template <typename Scalar>
class BasicLayeredParams {
 public:
  using scalar_type = Scalar;

  BasicLayeredParams() = default;
  explicit BasicLayeredParams(std::vector<Layer<Scalar>> layers) : layers_(std::move(layers)) {
    for (const auto& l : layers_) {
      if (l.kind == LayerKind::kVector && l.values.rows() != 1) {
        throw ShapeError("vector layer '" + l.name + "' must have exactly one row");
      }
    }
  }

  Layer<Scalar>& add_matrix(std::string name, Eigen::Index rows, Eigen::Index cols) {
    layers_.push_back({std::move(name), LayerKind::kMatrix, RowMatrix<Scalar>::Zero(rows, cols)});
    return layers_.back();
  }

  Layer<Scalar>& add_vector(std::string name, Eigen::Index len) {
    layers_.push_back({std::move(name), LayerKind::kVector, RowMatrix<Scalar>::Zero(1, len)});
    return layers_.back();
  }

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }

  Layer<Scalar>& operator[](std::size_t i) { return layers_[i]; }
  const Layer<Scalar>& operator[](std::size_t i) const { return layers_[i]; }

  auto begin() { return layers_.begin(); }
  auto end() { return layers_.end(); }
  auto begin() const { return layers_.begin(); }
  auto end() const { return layers_.end(); }

  /// Total number of scalar parameters across layers.
  Eigen::Index num_scalars() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.values.size();
    return n;
  }

  template <typename To>
  BasicLayeredParams<To> cast() const {
    std::vector<Layer<To>> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back({l.name, l.kind, l.values.template cast<To>()});
    return BasicLayeredParams<To>(std::move(out));
  }

  friend bool operator==(const BasicLayeredParams& a, const BasicLayeredParams& b) {
    return a.layers_ == b.layers_;
  }

 private:
  std::vector<Layer<Scalar>> layers_;
};

using LayeredParams = BasicLayeredParams<float>;

template <typename Scalar>
bool shape_compatible(const BasicLayeredParams<Scalar>& a, const BasicLayeredParams<Scalar>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_shape(b[i])) return false;
  }
  return true;
}

template <typename Scalar>
void require_compatible(const BasicLayeredParams<Scalar>& a, const BasicLayeredParams<Scalar>& b) {
  if (!shape_compatible(a, b)) throw ShapeError("parameter sets are not shape-compatible");
}

template <typename Scalar>
bool all_finite(const BasicLayeredParams<Scalar>& p) {
  for (const auto& l : p) {
    if (!l.values.allFinite()) return false;
  }
  return true;
}

/// Mean over layers of the mean row-wise cosine similarity.
///
/// A row whose norm is zero on either side contributes 0 to its layer's
/// average. The result is clamped to [-1, 1].
template <typename Scalar>
double cosine_similarity(const BasicLayeredParams<Scalar>& p, const BasicLayeredParams<Scalar>& m) {
  require_compatible(p, m);
  if (p.empty()) throw ShapeError("cosine similarity of empty parameter sets");
  double layer_sum = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    const auto& a = p[l].values;
    const auto& b = m[l].values;
    double row_sum = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const Vector<double> ra = a.row(r).transpose().template cast<double>();
      const Vector<double> rb = b.row(r).transpose().template cast<double>();
      const double na = ra.norm();
      const double nb = rb.norm();
      if (na > 0.0 && nb > 0.0) row_sum += ra.dot(rb) / (na * nb);
    }
    if (a.rows() > 0) layer_sum += row_sum / static_cast<double>(a.rows());
  }
  return std::clamp(layer_sum / static_cast<double>(p.size()), -1.0, 1.0);
}

/// Frobenius norm of every layer, in layer order.
template <typename Scalar>
std::vector<double> layer_norms(const BasicLayeredParams<Scalar>& p) {
  std::vector<double> norms;
  norms.reserve(p.size());
  for (const auto& l : p) norms.push_back(l.values.template cast<double>().norm());
  return norms;
}

template <typename Scalar>
BasicLayeredParams<Scalar> weighted_average(const std::vector<const BasicLayeredParams<Scalar>*>& params,
                                            std::span<const double> weights) {
  if (params.empty() || params.size() != weights.size()) {
    throw std::invalid_argument("weighted_average: need one weight per parameter set");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weighted_average: weights must be finite and non-negative");
    }
    total += w;
  }
  if (total <= 0.0) throw DegenerateAggregation("weighted_average: weights sum to zero");
  for (const auto* p : params) require_compatible(*p, *params.front());

  BasicLayeredParams<Scalar> out = *params.front();
  for (std::size_t l = 0; l < out.size(); ++l) {
    RowMatrix<double> acc = RowMatrix<double>::Zero(out[l].values.rows(), out[l].values.cols());
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (weights[i] == 0.0) continue;
      acc.noalias() += weights[i] * (*params[i])[l].values.template cast<double>();
    }
    out[l].values = (acc / total).template cast<Scalar>();
  }
  return out;
}

template <typename Scalar>
BasicLayeredParams<Scalar> weighted_average(const std::vector<BasicLayeredParams<Scalar>>& params,
                                            std::span<const double> weights) {
  std::vector<const BasicLayeredParams<Scalar>*> ptrs;
  ptrs.reserve(params.size());
  for (const auto& p : params) ptrs.push_back(&p);
  return weighted_average(ptrs, weights);
}

/// Concatenation of all layers in order, row-major within each layer.
template <typename Scalar>
Vector<Scalar> flatten(const BasicLayeredParams<Scalar>& p) {
  Vector<Scalar> out(p.num_scalars());
  Eigen::Index offset = 0;
  for (const auto& l : p) {
    const auto n = l.values.size();
    out.segment(offset, n) = Eigen::Map<const Vector<Scalar>>(l.values.data(), n);
    offset += n;
  }
  return out;
}

/// Inverse of flatten(): takes names and shapes from `schema`.
template <typename Scalar, typename Derived>
BasicLayeredParams<Scalar> unflatten(const BasicLayeredParams<Scalar>& schema,
                                     const Eigen::MatrixBase<Derived>& flat) {
  if (flat.size() != schema.num_scalars()) {
    throw ShapeError("unflatten: vector length does not match the schema");
  }
  BasicLayeredParams<Scalar> out = schema;
  Eigen::Index offset = 0;
  for (auto& l : out) {
    const auto n = l.values.size();
    Eigen::Map<Vector<Scalar>>(l.values.data(), n) =
        flat.segment(offset, n).template cast<Scalar>();
    offset += n;
  }
  return out;
}

/// Multiplies layer l by factors[l].
template <typename Scalar>
BasicLayeredParams<Scalar> scale_layers(BasicLayeredParams<Scalar> p, std::span<const double> factors) {
  if (factors.size() != p.size()) throw ShapeError("scale_layers: one factor per layer required");
  for (std::size_t l = 0; l < p.size(); ++l) {
    if (factors[l] != 1.0) {
      p[l].values = (p[l].values.template cast<double>() * factors[l]).template cast<Scalar>();
    }
  }
  return p;
}

}  // namespace dfl
