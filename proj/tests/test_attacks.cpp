#include <gtest/gtest.h>

#include <set>

#include "dfl/attacks.hpp"
#include "support.hpp"

namespace dfl {
namespace {

Dataset zero_images(int n, int classes = 10) {
  Dataset ds;
  ds.num_classes = classes;
  ds.image = ImageShape{28, 28};
  ds.features = RowMatrix<float>::Zero(n, 784);
  for (int i = 0; i < n; ++i) ds.labels.push_back(i % classes);
  return ds;
}

TEST(SelectMalicious, Cardinality) {
  EXPECT_TRUE(select_malicious(10, 0.0, 1).empty());
  EXPECT_EQ(select_malicious(10, 1.0, 1).size(), 10u);
  const auto m = select_malicious(10, 0.5, 1);
  EXPECT_EQ(std::set<int>(m.begin(), m.end()).size(), 5u);
  EXPECT_EQ(select_malicious(10, 0.5, 1), m);
  EXPECT_EQ(select_malicious(10, 0.1, 1).size(), 1u);
  EXPECT_EQ(select_malicious(10, 0.8, 1).size(), 8u);
}

TEST(SelectMalicious, NeverPicksObserver) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto m = select_malicious(10, 0.8, s, 3);
    EXPECT_EQ(std::count(m.begin(), m.end(), 3), 0);
    EXPECT_EQ(m.size(), 8u);
  }
}

TEST(PoisonModel, ReplacesExactCount) {
  LayeredParams p;
  p.add_matrix("w", 10, 90).values.setConstant(0.25f);
  p.add_vector("b", 100).values.setConstant(0.25f);
  const auto out = poison_model(p, 0.8, 1.0, 3);
  int replaced = 0;
  for (const auto& l : out) {
    for (Eigen::Index i = 0; i < l.values.size(); ++i) {
      const float v = l.values.data()[i];
      if (v != 0.25f) {
        ++replaced;
        EXPECT_TRUE(v == 1.0f || v == -1.0f);
      }
    }
  }
  EXPECT_EQ(replaced, 800);
}

TEST(PoisonModel, EdgeRatios) {
  Rng rng(1);
  const auto p = test::random_params(rng, {{LayerKind::kMatrix, 4, 5}, {LayerKind::kVector, 1, 4}});
  EXPECT_EQ(poison_model(p, 0.0, 1.0, 2), p);
  const auto all = poison_model(p, 1.0, 2.5, 2);
  for (const auto& l : all) EXPECT_TRUE((l.values.array().abs() == 2.5f).all());
  EXPECT_EQ(poison_model(p, 0.5, 1.0, 9), poison_model(p, 0.5, 1.0, 9));
}

TEST(FlipUntargeted, NoLabelKeptAndRoughlyUniform) {
  Dataset ds;
  ds.num_classes = 10;
  ds.features = RowMatrix<float>::Zero(20000, 1);
  ds.labels.assign(20000, 4);
  const auto out = flip_labels_untargeted(ds, 5);
  std::vector<int> hist(10, 0);
  for (int y : out.labels) ++hist[static_cast<std::size_t>(y)];
  EXPECT_EQ(hist[4], 0);
  // chi-square over the 9 other classes, 8 dof; 26.1 is the 0.999 quantile
  const double expected = 20000.0 / 9.0;
  double chi2 = 0.0;
  for (int c = 0; c < 10; ++c) {
    if (c != 4) chi2 += (hist[c] - expected) * (hist[c] - expected) / expected;
  }
  EXPECT_LT(chi2, 26.1);
}

TEST(FlipUntargeted, BinaryInverts) {
  Dataset ds;
  ds.num_classes = 2;
  ds.features = RowMatrix<float>::Zero(6, 1);
  ds.labels = {0, 1, 1, 0, 0, 1};
  EXPECT_EQ(flip_labels_untargeted(ds, 1).labels, (std::vector<int>{1, 0, 0, 1, 1, 0}));
}

TEST(FlipTargeted, RelabelsOnlySource) {
  auto ds = zero_images(100);
  const auto out = flip_labels_targeted(ds, 7, 1);
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    EXPECT_EQ(out.labels[i], ds.labels[i] == 7 ? 1 : ds.labels[i]);
  }
  EXPECT_EQ(std::count(out.labels.begin(), out.labels.end(), 1),
            std::count(ds.labels.begin(), ds.labels.end(), 1) + 10);
  EXPECT_EQ(flip_labels_targeted(out, 7, 1).labels, out.labels);  // no source left: unchanged
}

TEST(Trigger, ImageXSetsNinePixels) {
  RowMatrix<float> row = RowMatrix<float>::Zero(1, 784);
  apply_trigger(row, Trigger{}, ImageShape{28, 28});
  EXPECT_EQ((row.array() == 1.0f).count(), 9);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(row(0, i * 28 + i), 1.0f);
    EXPECT_EQ(row(0, i * 28 + 4 - i), 1.0f);
  }
}

TEST(Trigger, CornersStayInBounds) {
  for (auto c : {Corner::kTopRight, Corner::kBottomLeft, Corner::kBottomRight, Corner::kCenter}) {
    RowMatrix<float> row = RowMatrix<float>::Zero(1, 784);
    Trigger t;
    t.corner = c;
    apply_trigger(row, t, ImageShape{28, 28});
    EXPECT_EQ((row.array() == 1.0f).count(), 9);
  }
  RowMatrix<float> br = RowMatrix<float>::Zero(1, 784);
  Trigger t;
  t.corner = Corner::kBottomRight;
  apply_trigger(br, t, ImageShape{28, 28});
  EXPECT_EQ(br(0, 783), 1.0f);
}

TEST(Trigger, TabularOnes) {
  RowMatrix<float> row = RowMatrix<float>::Zero(1, 12);
  Trigger t;
  t.kind = TriggerKind::kTabularOnes;
  t.k = 7;
  apply_trigger(row, t, std::nullopt);
  EXPECT_TRUE((row.leftCols(7).array() == 1.0f).all());
  EXPECT_TRUE((row.rightCols(5).array() == 0.0f).all());
}

TEST(Backdoor, ImplantFraction) {
  const auto ds = zero_images(100);
  EXPECT_TRUE(implant_backdoor(ds, Trigger{}, 0, 0.0, 1).features == ds.features);
  const auto out = implant_backdoor(ds, Trigger{}, 0, 0.2, 1);
  int triggered = 0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out.features(i, 0) == 1.0f) {
      ++triggered;
      EXPECT_EQ(out.labels[static_cast<std::size_t>(i)], 0);
    } else {
      EXPECT_EQ(out.labels[static_cast<std::size_t>(i)], ds.labels[static_cast<std::size_t>(i)]);
    }
  }
  EXPECT_EQ(triggered, 20);
}

TEST(Backdoor, RejectsOversizedOrMismatchedTrigger) {
  auto ds = zero_images(4);
  Trigger big;
  big.size = 29;
  EXPECT_THROW(implant_backdoor(ds, big, 0, 0.5, 1), std::invalid_argument);
  ds.image.reset();
  EXPECT_THROW(implant_backdoor(ds, Trigger{}, 0, 0.5, 1), std::invalid_argument);
}

TEST(Backdoor, EvalSetKeepsLabels) {
  const auto ds = zero_images(30);
  const auto b = build_backdoor_eval_set(ds, Trigger{}, 0);
  EXPECT_EQ(b.size(), ds.size());
  EXPECT_EQ(b.labels, ds.labels);
  for (Eigen::Index i = 0; i < b.size(); ++i) EXPECT_EQ((b.features.row(i).array() == 1.0f).count(), 9);
}

}  // namespace
}  // namespace dfl
