#include "dfl/metrics.hpp"

#include <stdexcept>

namespace dfl {

ConfusionMatrix::ConfusionMatrix(Counts counts) : counts_(std::move(counts)) {
  if (counts_.rows() != counts_.cols()) throw std::invalid_argument("confusion matrix must be square");
  if ((counts_.array() < 0).any()) throw std::invalid_argument("confusion counts must be non-negative");
}

void ConfusionMatrix::add(int true_label, int predicted_label, std::int64_t n) {
  if (true_label < 0 || true_label >= num_classes() || predicted_label < 0 ||
      predicted_label >= num_classes()) {
    throw std::out_of_range("confusion matrix label out of range");
  }
  counts_(true_label, predicted_label) += n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes() != num_classes()) throw std::invalid_argument("confusion matrix size mismatch");
  counts_ += other.counts_;
}

double macro_f1(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  if (k == 0) throw std::invalid_argument("macro_f1 of an empty confusion matrix");
  const auto& c = cm.counts();
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const double tp = static_cast<double>(c(i, i));
    if (tp == 0.0) continue;
    const double predicted = static_cast<double>(c.col(i).sum());
    const double actual = static_cast<double>(c.row(i).sum());
    // 2PR/(P+R) simplifies to 2TP/(predicted + actual).
    sum += 2.0 * tp / (predicted + actual);
  }
  return sum / k;
}

double micro_f1(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) return 0.0;
  return static_cast<double>(cm.counts().trace()) / static_cast<double>(total);
}

double f1_score(const ConfusionMatrix& cm, F1Averaging averaging) {
  return averaging == F1Averaging::kMacro ? macro_f1(cm) : micro_f1(cm);
}

std::optional<double> asr_label_flip(const ConfusionMatrix& cm, int src, int target) {
  const auto support = cm.counts().row(src).sum();
  if (support == 0) return std::nullopt;
  return static_cast<double>(cm(src, target)) / static_cast<double>(support);
}

std::optional<double> backdoor_accuracy(const ConfusionMatrix& cm_b, int target, std::int64_t b_size) {
  const auto hits = cm_b.counts().col(target).sum();
  const auto ctt = cm_b(target, target);
  if (b_size <= ctt) return std::nullopt;
  return static_cast<double>(hits - ctt) / static_cast<double>(b_size - ctt);
}

}  // namespace dfl
