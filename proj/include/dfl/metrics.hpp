#pragma once

// Classification metrics computed from confusion matrices.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace dfl {

/// counts(i, j) = number of samples with true label i predicted as j.
class ConfusionMatrix {
 public:
  using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes) : counts_(Counts::Zero(num_classes, num_classes)) {}
  explicit ConfusionMatrix(Counts counts);

  void add(int true_label, int predicted_label, std::int64_t n = 1);
  void merge(const ConfusionMatrix& other);

  int num_classes() const { return static_cast<int>(counts_.rows()); }
  std::int64_t operator()(int true_label, int predicted_label) const {
    return counts_(true_label, predicted_label);
  }
  std::int64_t total() const { return counts_.sum(); }
  const Counts& counts() const { return counts_; }

  friend bool operator==(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    return a.counts_.rows() == b.counts_.rows() && a.counts_.cols() == b.counts_.cols() &&
           a.counts_ == b.counts_;
  }

 private:
  Counts counts_;
};

enum class F1Averaging { kMacro, kMicro };

/// Unweighted mean of per-class F1. A class without true positives scores 0.
double macro_f1(const ConfusionMatrix& cm);

/// Pooled F1 over all classes; equals accuracy for single-label problems.
double micro_f1(const ConfusionMatrix& cm);

double f1_score(const ConfusionMatrix& cm, F1Averaging averaging);

/// Share of `src` samples predicted as `target`. Empty when `src` has no samples.
std::optional<double> asr_label_flip(const ConfusionMatrix& cm, int src, int target);

/// Share of non-target samples in the triggered set B that are predicted as
/// `target`. `cm_b` must be built with the original (pre-trigger) labels.
/// Empty when every sample of B is a true target sample.
std::optional<double> backdoor_accuracy(const ConfusionMatrix& cm_b, int target, std::int64_t b_size);

}  // namespace dfl
