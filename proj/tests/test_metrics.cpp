#include <gtest/gtest.h>

#include <random>

#include "dfl/metrics.hpp"
#include "dfl/random.hpp"

namespace dfl {
namespace {

ConfusionMatrix from_rows(std::initializer_list<std::initializer_list<std::int64_t>> rows) {
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (auto v : r) cm.add(i, j++, v);
    ++i;
  }
  return cm;
}

// Per-sample oracle: expands the counts into (true, predicted) pairs.
struct Samples {
  std::vector<int> y, yhat;
};

Samples expand(const ConfusionMatrix& cm) {
  Samples s;
  for (int i = 0; i < cm.num_classes(); ++i) {
    for (int j = 0; j < cm.num_classes(); ++j) {
      for (std::int64_t k = 0; k < cm(i, j); ++k) {
        s.y.push_back(i);
        s.yhat.push_back(j);
      }
    }
  }
  return s;
}

double oracle_macro_f1(const Samples& s, int classes) {
  double sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      if (s.yhat[i] == c && s.y[i] == c) ++tp;
      if (s.yhat[i] == c && s.y[i] != c) ++fp;
      if (s.yhat[i] != c && s.y[i] == c) ++fn;
    }
    const double p = tp + fp ? double(tp) / (tp + fp) : 0.0;
    const double r = tp + fn ? double(tp) / (tp + fn) : 0.0;
    sum += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  return sum / classes;
}

TEST(MacroF1, PerfectClassifier) { EXPECT_DOUBLE_EQ(macro_f1(from_rows({{5, 0, 0}, {0, 3, 0}, {0, 0, 9}})), 1.0); }

TEST(MacroF1, HandExample) { EXPECT_NEAR(macro_f1(from_rows({{50, 0}, {50, 0}})), 1.0 / 3.0, 1e-12); }

TEST(MacroF1, InvariantToClassRelabelling) {
  const auto a = from_rows({{4, 1, 2}, {0, 6, 3}, {2, 2, 5}});
  // swap classes 0 and 2 in both axes
  const auto b = from_rows({{5, 2, 2}, {3, 6, 0}, {2, 1, 4}});
  EXPECT_NEAR(macro_f1(a), macro_f1(b), 1e-12);
}

TEST(MicroF1, EqualsAccuracy) {
  EXPECT_DOUBLE_EQ(micro_f1(from_rows({{3, 1}, {2, 4}})), 0.7);
  EXPECT_DOUBLE_EQ(f1_score(from_rows({{3, 1}, {2, 4}}), F1Averaging::kMicro), 0.7);
}

TEST(AsrLabelFlip, Examples) {
  ConfusionMatrix cm(3);
  cm.add(1, 1, 60);
  cm.add(1, 2, 40);
  EXPECT_DOUBLE_EQ(*asr_label_flip(cm, 1, 2), 0.4);
  EXPECT_DOUBLE_EQ(*asr_label_flip(cm, 1, 0), 0.0);
  ConfusionMatrix all(3);
  all.add(0, 2, 7);
  EXPECT_DOUBLE_EQ(*asr_label_flip(all, 0, 2), 1.0);
}

TEST(AsrLabelFlip, AbsentWithoutSourceSamples) {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 5);
  EXPECT_FALSE(asr_label_flip(cm, 1, 2).has_value());
}

TEST(BackdoorAccuracy, Examples) {
  // |B| = 110, c_tt = 10, column t sums to 90
  ConfusionMatrix cm(3);
  cm.add(0, 0, 10);  // target class 0
  cm.add(1, 0, 45);
  cm.add(2, 0, 35);
  cm.add(1, 1, 10);
  cm.add(2, 2, 10);
  ASSERT_EQ(cm.total(), 110);
  EXPECT_NEAR(*backdoor_accuracy(cm, 0, 110), 0.8, 1e-12);

  ConfusionMatrix none(2);
  none.add(1, 1, 10);
  EXPECT_DOUBLE_EQ(*backdoor_accuracy(none, 0, 10), 0.0);
  ConfusionMatrix every(2);
  every.add(1, 0, 10);
  EXPECT_DOUBLE_EQ(*backdoor_accuracy(every, 0, 10), 1.0);
}

TEST(BackdoorAccuracy, AbsentWhenOnlyTargetSamples) {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 4);
  EXPECT_FALSE(backdoor_accuracy(cm, 0, 4).has_value());
}

TEST(Metrics, MatchPerSampleCountingOnRandomMatrices) {
  Rng rng(11);
  std::uniform_int_distribution<int> classes(2, 5), count(0, 20);
  for (int t = 0; t < 200; ++t) {
    const int c = classes(rng);
    ConfusionMatrix cm(c);
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < c; ++j) cm.add(i, j, count(rng));
    }
    const auto s = expand(cm);
    if (s.y.empty()) continue;
    EXPECT_NEAR(macro_f1(cm), oracle_macro_f1(s, c), 1e-12);
    const int src = static_cast<int>(rng() % c), tgt = static_cast<int>(rng() % c);
    int src_n = 0, src_t = 0, non_t = 0, non_t_hit = 0;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      if (s.y[i] == src) {
        ++src_n;
        src_t += s.yhat[i] == tgt;
      }
      // every sample except target-labelled ones the model already maps to target
      if (!(s.y[i] == tgt && s.yhat[i] == tgt)) {
        ++non_t;
        non_t_hit += s.yhat[i] == tgt;
      }
    }
    const auto asr = asr_label_flip(cm, src, tgt);
    ASSERT_EQ(asr.has_value(), src_n > 0);
    if (asr) {
      EXPECT_DOUBLE_EQ(*asr, double(src_t) / src_n);
    }
    const auto ba = backdoor_accuracy(cm, tgt, static_cast<std::int64_t>(s.y.size()));
    ASSERT_EQ(ba.has_value(), non_t > 0);
    if (ba) {
      EXPECT_DOUBLE_EQ(*ba, double(non_t_hit) / non_t);
    }
  }
}

TEST(ConfusionMatrix, MergeAddsCounts) {
  auto a = from_rows({{1, 2}, {3, 4}});
  a.merge(from_rows({{1, 0}, {0, 1}}));
  EXPECT_EQ(a, from_rows({{2, 2}, {3, 5}}));
  EXPECT_EQ(a.total(), 12);
}

}  // namespace
}  // namespace dfl
