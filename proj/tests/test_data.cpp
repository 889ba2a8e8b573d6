#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dfl/data.hpp"
#include "support.hpp"

namespace dfl {
namespace {

Dataset balanced(int classes, int per_class) {
  Dataset ds;
  ds.num_classes = classes;
  ds.features = RowMatrix<float>::Zero(classes * per_class, 2);
  for (int i = 0; i < classes * per_class; ++i) {
    ds.labels.push_back(i % classes);
    ds.features(i, 0) = static_cast<float>(i);
  }
  return ds;
}

TEST(Idx, LoadsImagesAndScalesPixels) {
  test::TempDir dir;
  std::vector<std::vector<std::uint8_t>> px(10, std::vector<std::uint8_t>(28 * 28, 0));
  px[3].assign(28 * 28, 255);
  px[4][5] = 51;
  std::vector<std::uint8_t> y{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  test::write_idx(dir / "img", dir / "lbl", px, y, 28, 28);
  const auto ds = load_idx_images(dir / "img", dir / "lbl");
  EXPECT_EQ(ds.size(), 10);
  EXPECT_EQ(ds.dims(), 784);
  EXPECT_EQ(ds.num_classes, 10);
  ASSERT_TRUE(ds.image.has_value());
  EXPECT_EQ(ds.image->height, 28);
  EXPECT_TRUE((ds.features.row(3).array() == 1.0f).all());
  EXPECT_FLOAT_EQ(ds.features(4, 5), 0.2f);
  EXPECT_EQ(ds.labels, std::vector<int>(y.begin(), y.end()));
}

TEST(Idx, RejectsWrongMagic) {
  test::TempDir dir;
  test::write_idx(dir / "img", dir / "lbl", {std::vector<std::uint8_t>(4, 0)}, {1}, 2, 2);
  // labels file used as images: magic 0x801
  EXPECT_THROW(load_idx_images(dir / "lbl", dir / "lbl"), FormatError);
}

TEST(Idx, RejectsTruncationAndCountMismatch) {
  test::TempDir dir;
  test::write_idx(dir / "img", dir / "lbl", {std::vector<std::uint8_t>(4, 0), std::vector<std::uint8_t>(4, 0)},
                  {1, 0}, 2, 2);
  std::filesystem::resize_file(dir / "img", std::filesystem::file_size(dir / "img") - 1);
  EXPECT_THROW(load_idx_images(dir / "img", dir / "lbl"), FormatError);

  test::write_idx(dir / "img2", dir / "lbl2", {std::vector<std::uint8_t>(4, 0), std::vector<std::uint8_t>(4, 0)},
                  {1}, 2, 2);
  EXPECT_THROW(load_idx_images(dir / "img2", dir / "lbl2"), FormatError);
  EXPECT_THROW(load_idx_images(dir / "missing", dir / "lbl2"), FormatError);
}

TEST(SynthTabular, DeterministicAndBalanced) {
  const auto a = synth_tabular(2, 8, 600, 3), b = synth_tabular(2, 8, 600, 3);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE(a.features == b.features);
  EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), 0), 300);
  EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), 1), 300);
  EXPECT_FALSE(synth_tabular(2, 8, 600, 4).features == a.features);
}

TEST(SynthTabular, LinearProbeSeparatesDefaultClusters) {
  // least-squares one-vs-rest probe with a bias column
  const auto ds = synth_tabular(10, 32, 2000, 9);
  Eigen::MatrixXd x(ds.size(), ds.dims() + 1);
  x.leftCols(ds.dims()) = ds.features.cast<double>();
  x.col(ds.dims()).setOnes();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(ds.size(), 10);
  for (Eigen::Index i = 0; i < ds.size(); ++i) y(i, ds.labels[static_cast<std::size_t>(i)]) = 1.0;
  const Eigen::MatrixXd w = x.colPivHouseholderQr().solve(y);
  const Eigen::MatrixXd scores = x * w;
  int correct = 0;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    Eigen::Index arg;
    scores.row(i).maxCoeff(&arg);
    correct += arg == ds.labels[static_cast<std::size_t>(i)];
  }
  EXPECT_GT(correct / double(ds.size()), 0.9);
}

TEST(Partition, IidExactDivision) {
  const auto ds = balanced(10, 10);
  PartitionConfig cfg;
  cfg.nodes = 10;
  cfg.seed = 1;
  const auto alloc = allocate_samples(ds.labels, 10, cfg);
  ASSERT_EQ(alloc.size(), 10u);
  for (const auto& a : alloc) {
    ASSERT_EQ(a.size(), 10u);
    std::set<int> seen;
    for (auto i : a) seen.insert(ds.labels[i]);
    EXPECT_EQ(seen.size(), 10u);
  }
}

TEST(Partition, IidHistogramsDifferByAtMostOne) {
  Rng rng(2);
  std::vector<int> labels(997);
  for (auto& y : labels) y = static_cast<int>(rng() % 7);
  PartitionConfig cfg;
  cfg.nodes = 6;
  cfg.seed = 3;
  const auto alloc = allocate_samples(labels, 7, cfg);
  for (int c = 0; c < 7; ++c) {
    std::vector<long> h;
    for (const auto& a : alloc) h.push_back(std::count_if(a.begin(), a.end(), [&](auto i) { return labels[i] == c; }));
    EXPECT_LE(*std::max_element(h.begin(), h.end()) - *std::min_element(h.begin(), h.end()), 1);
  }
}

TEST(Partition, AllocationsAreDisjointAndConserve) {
  const auto ds = balanced(10, 53);
  for (auto mode : {PartitionMode::kIid, PartitionMode::kDirichlet}) {
    PartitionConfig cfg;
    cfg.mode = mode;
    cfg.seed = 4;
    const auto alloc = allocate_samples(ds.labels, 10, cfg);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& a : alloc) {
      total += a.size();
      seen.insert(a.begin(), a.end());
    }
    EXPECT_EQ(seen.size(), total);
    EXPECT_EQ(total, static_cast<std::size_t>(ds.size()));
  }
}

TEST(Partition, DirichletSkewsClassShares) {
  const auto ds = balanced(10, 100);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PartitionConfig cfg;
    cfg.mode = PartitionMode::kDirichlet;
    cfg.alpha = 0.5;
    cfg.seed = seed;
    const auto alloc = allocate_samples(ds.labels, 10, cfg);
    bool skewed = false;
    for (const auto& a : alloc) {
      for (int c = 0; c < 10; ++c) {
        const double share = std::count_if(a.begin(), a.end(), [&](auto i) { return ds.labels[i] == c; }) /
                             static_cast<double>(a.size());
        skewed = skewed || share > 2.0 * 0.1;
      }
    }
    EXPECT_TRUE(skewed) << "seed " << seed;
  }
}

TEST(Partition, RejectsTooFewSamples) {
  const auto ds = balanced(10, 5);
  PartitionConfig cfg;
  cfg.nodes = 10;
  EXPECT_THROW(allocate_samples(ds.labels, 10, cfg), InsufficientData);
}

TEST(Partition, SplitsFollowConfiguredRatios) {
  const auto ds = balanced(10, 70);
  PartitionConfig cfg;
  cfg.seed = 5;
  const auto nodes = partition(ds, cfg);
  ASSERT_EQ(nodes.size(), 10u);
  std::set<std::size_t> seen;
  for (const auto& n : nodes) {
    EXPECT_EQ(n.indices.test.size(), 10u);  // 70 / 7
    EXPECT_EQ(n.indices.val.size(), 6u);    // 10% of 60
    EXPECT_EQ(n.indices.train.size(), 54u);
    EXPECT_EQ(n.train.size(), 54);
    for (const auto* part : {&n.indices.train, &n.indices.val, &n.indices.test}) {
      for (auto i : *part) EXPECT_TRUE(seen.insert(i).second);
    }
    for (auto b : n.indices.bootstrap) {
      EXPECT_NE(std::find(n.indices.val.begin(), n.indices.val.end(), b), n.indices.val.end());
    }
    EXPECT_EQ(std::set<std::size_t>(n.indices.bootstrap.begin(), n.indices.bootstrap.end()).size(),
              n.indices.bootstrap.size());
  }
}

TEST(Partition, Deterministic) {
  const auto ds = balanced(10, 40);
  PartitionConfig cfg;
  cfg.mode = PartitionMode::kDirichlet;
  cfg.seed = 6;
  const auto a = partition(ds, cfg), b = partition(ds, cfg);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].indices.train, b[k].indices.train);
    EXPECT_EQ(a[k].indices.bootstrap, b[k].indices.bootstrap);
  }
}

TEST(Bootstrap, SizeRule) {
  EXPECT_EQ(bootstrap_size(1200), 400u);
  EXPECT_EQ(bootstrap_size(200), 200u);
  EXPECT_EQ(bootstrap_size(600), 300u);
  EXPECT_EQ(bootstrap_size(1000), 334u);  // ceil(1000 / 3)
  EXPECT_EQ(bootstrap_size(0), 0u);
}

TEST(Bootstrap, SampleWithoutReplacementDeterministic) {
  const auto pos = bootstrap_positions(1200, 7);
  EXPECT_EQ(pos.size(), 400u);
  EXPECT_EQ(std::set<std::size_t>(pos.begin(), pos.end()).size(), 400u);
  EXPECT_EQ(pos, bootstrap_positions(1200, 7));
  const auto val = balanced(10, 120);
  EXPECT_EQ(sample_bootstrap(val, 7).size(), 400);
}

TEST(Manifest, ListsEverySplit) {
  SplitIndices s;
  s.train = {1, 2};
  s.val = {3};
  s.test = {4};
  s.bootstrap = {3};
  std::vector<SplitIndices> nodes{s};
  std::ostringstream out;
  write_partition_manifest(out, nodes);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["nodes"][0]["node"], 0);
  EXPECT_EQ(j["nodes"][0]["train"], nlohmann::json({1, 2}));
  EXPECT_EQ(j["nodes"][0]["bootstrap"], nlohmann::json({3}));
}

}  // namespace
}  // namespace dfl
