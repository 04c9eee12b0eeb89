#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "scoopsim/errors.hpp"
#include "scoopsim/learning.hpp"
#include "test_util.hpp"

using namespace scoopsim;
using namespace scoopsim::testing;

namespace {

// Two Gaussian blobs in d dimensions, separated along every axis.
void blobs(int n, int d, std::uint64_t seed, std::vector<std::vector<double>>& x,
           std::vector<int>& y) {
  RandomStream r(seed, "blobs");
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    std::vector<double> v(d);
    for (auto& e : v) e = r.gaussian(label ? 1.5 : -1.5, 0.5);
    x.push_back(std::move(v));
    y.push_back(label);
  }
}

BinaryClassifier random_model(ModelKind kind, int d, std::uint64_t seed) {
  BinaryClassifier m = BinaryClassifier::zeros(kind, d, 8);
  RandomStream r(seed, "params");
  for (double& p : m.params) p = r.gaussian(0.0, 0.3);
  return m;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

void check_gradient(ModelKind kind) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  blobs(20, 6, 3, x, y);
  BinaryClassifier m = random_model(kind, 6, 4);
  const auto g = bce_gradient(m, x, y);
  ASSERT_EQ(g.size(), m.param_count());
  RandomStream pick(5, "coords");
  const double h = 1e-5;
  for (int t = 0; t < 10; ++t) {
    const std::size_t i = pick.next_u64() % m.params.size();
    BinaryClassifier plus = m, minus = m;
    plus.params[i] += h;
    minus.params[i] -= h;
    const double fd = (bce_loss(plus, x, y) - bce_loss(minus, x, y)) / (2.0 * h);
    EXPECT_LT(relative_error(g[i], fd), 1e-4) << "param " << i;
  }
}

SideGrid constant_grid(double v) {
  SideGrid g;
  for (double& p : g.pixels) p = v;
  return g;
}

}  // namespace

TEST(Model, ParamCounts) {
  EXPECT_EQ(BinaryClassifier::zeros(ModelKind::Linear, 192).param_count(), 193u);
  EXPECT_EQ(BinaryClassifier::zeros(ModelKind::OneHiddenLayer, 192, 32).param_count(),
            32u * 192u + 32u + 32u + 1u);
}

TEST(Model, ZeroLinearPredictsHalf) {
  const BinaryClassifier m = BinaryClassifier::zeros(ModelKind::Linear, 4);
  const std::vector<double> x{1.0, -2.0, 3.0, 0.5};
  EXPECT_DOUBLE_EQ(predict(m, x), 0.5);
}

TEST(Model, WrongLengthIsShapeMismatch) {
  const BinaryClassifier m = BinaryClassifier::zeros(ModelKind::Linear, 4);
  const std::vector<double> x{1.0, 2.0};
  try {
    predict(m, x);
    FAIL();
  } catch (const ScoopError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Gradient, LinearMatchesFiniteDifferences) { check_gradient(ModelKind::Linear); }
TEST(Gradient, HiddenLayerMatchesFiniteDifferences) { check_gradient(ModelKind::OneHiddenLayer); }

TEST(Train, SeparableBlobsReachNinetyNinePercent) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  blobs(400, 8, 11, x, y);
  for (ModelKind kind : {ModelKind::Linear, ModelKind::OneHiddenLayer}) {
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 30;
    const BinaryClassifier m = train_features(x, y, kind, cfg);
    int correct = 0;
    for (std::size_t i = 0; i < x.size(); ++i) correct += (predict(m, x[i]) >= 0.5) == (y[i] == 1);
    EXPECT_GE(correct / double(x.size()), 0.99);
  }
}

TEST(Train, SinglePositiveSampleRisesMonotonically) {
  std::vector<std::vector<double>> x{{0.5, -1.0, 2.0}};
  std::vector<int> y{1};
  double prev = 0.5;
  for (int epochs = 1; epochs <= 5; ++epochs) {
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = epochs;
    const double p = predict(train_features(x, y, ModelKind::Linear, cfg), x[0]);
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(Train, LossLogIsFiniteAndDecreasing) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  blobs(200, 4, 13, x, y);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 10;
  std::vector<double> log;
  train_features(x, y, ModelKind::Linear, cfg, &log);
  ASSERT_EQ(log.size(), 10u);
  EXPECT_LT(log.back(), log.front());
}

TEST(Train, RejectsEmptyAndSingleLabelSets) {
  LabeledSet empty;
  EXPECT_THROW(train(empty, ModelKind::Linear, {}), ScoopError);
  LabeledSet one;
  one.samples.push_back({constant_grid(0.1), 1, 0, "a"});
  one.samples.push_back({constant_grid(0.2), 1, 0, "a"});
  try {
    train(one, ModelKind::Linear, {});
    FAIL();
  } catch (const ScoopError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidDataset);
  }
}

TEST(Train, GridTrainingFitsNormAndSeparates) {
  LabeledSet set;
  RandomStream r(1, "grids");
  for (int i = 0; i < 40; ++i) {
    SideGrid g;
    const int label = i % 2;
    for (double& p : g.pixels) p = std::clamp(r.gaussian(label ? 0.8 : 0.3, 0.05), 0.0, 1.0);
    set.samples.push_back({g, label, static_cast<std::uint64_t>(i), label ? "hi" : "lo"});
  }
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 20;
  const BinaryClassifier m = train(set, ModelKind::Linear, cfg);
  EXPECT_TRUE(m.norm.fitted());
  const Metrics met = evaluate(m, set);
  EXPECT_DOUBLE_EQ(met.accuracy, 1.0);
  EXPECT_EQ(met.per_class.at("hi").second, 20);
  // Own training point lands on the right side of the threshold.
  EXPECT_GE(predict_grid(m, set.samples[1].grid), m.threshold);
  EXPECT_LT(predict_grid(m, set.samples[0].grid), m.threshold);
}

TEST(Evaluate, AccuracyMatchesRecount) {
  // Bias-only model: p = sigmoid(b).
  BinaryClassifier m = BinaryClassifier::zeros(ModelKind::Linear);
  m.norm.mean.assign(kFeatureDim, 0.0);
  m.norm.stddev.assign(kFeatureDim, 1.0);
  m.params.back() = std::log(0.99 / 0.01);
  LabeledSet pos;
  for (int i = 0; i < 5; ++i) pos.samples.push_back({constant_grid(0.1 * i), 1, 0, "x"});
  EXPECT_DOUBLE_EQ(evaluate(m, pos).accuracy, 1.0);

  LabeledSet mixed = pos;
  for (int i = 0; i < 3; ++i) mixed.samples.push_back({constant_grid(0.5), 0, 0, "y"});
  const Metrics met = evaluate(m, mixed);
  EXPECT_DOUBLE_EQ(met.accuracy, 5.0 / 8.0);
  EXPECT_EQ(met.tp, 5);
  EXPECT_EQ(met.fp, 3);
  EXPECT_DOUBLE_EQ(met.precision, 5.0 / 8.0);
  EXPECT_DOUBLE_EQ(met.recall, 1.0);
  EXPECT_THROW(evaluate(m, LabeledSet{}), ScoopError);
}

TEST(FragilityData, TwoClassesOnePerClass) {
  Catalog c;
  c.classes = {shipped_catalog()->at("grape"), shipped_catalog()->at("tofu")};
  FragilityOptions o;
  o.n_per_class = 1;
  o.holdout = {};
  const LabeledSet s = generate_fragility_dataset(std::make_shared<const Catalog>(c), o);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.count(0), 1u);
  EXPECT_EQ(s.count(1), 1u);
}

TEST(FragilityData, HoldoutAndDeterminism) {
  FragilityOptions o;
  o.n_per_class = 2;
  const LabeledSet a = generate_fragility_dataset(shipped_catalog(), o);
  EXPECT_EQ(a.size(), 14u * 2u);
  for (const auto& s : a.samples) EXPECT_NE(s.source, "orange_triangle_jello");
  const LabeledSet b = generate_fragility_dataset(shipped_catalog(), o);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.samples[i].grid, b.samples[i].grid);
  EXPECT_THROW(generate_fragility_dataset(std::make_shared<const Catalog>(), o), ScoopError);
}

TEST(BreakageData, WindowLabelsFramesBeforeTheBreak) {
  BreakageOptions o;
  o.n_rollouts = 3;
  o.window = 6;
  o.seed = 1;
  const BreakageDataset d = generate_breakage_dataset(shipped_catalog(), o);
  ASSERT_EQ(d.break_ticks.size(), 3u);
  EXPECT_EQ(d.set.size(), 3u * 60u);
  for (std::size_t r = 0; r < 3; ++r) {
    const int t_b = d.break_ticks[r];
    for (int k = 0; k < 60; ++k) {
      const int label = d.set.samples[r * 60 + k].label;
      if (t_b < 0) {
        EXPECT_EQ(label, 0);
      } else {
        EXPECT_EQ(label, k >= t_b - 6 ? 1 : 0) << "rollout " << r << " frame " << k;
      }
    }
  }
  EXPECT_GT(d.max_squeeze_increase, 0.0);
}

TEST(BreakageData, ZeroWindowHasNoStopFrames) {
  BreakageOptions o;
  o.n_rollouts = 1;
  o.window = 0;
  try {
    generate_breakage_dataset(shipped_catalog(), o);
    FAIL();
  } catch (const ScoopError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoBreakObserved);
  }
}

TEST(Augment, FactorScalesSizeAndKeepsLabels) {
  LabeledSet s;
  for (int i = 0; i < 10; ++i) s.samples.push_back({constant_grid(0.05 * i), i < 3, 0, "x"});
  const LabeledSet a = augment(s, 8, 1);
  EXPECT_EQ(a.size(), 80u);
  EXPECT_EQ(a.count(1), 24u);
  for (const auto& smp : a.samples) {
    for (double v : smp.grid.pixels) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
  const LabeledSet same = augment(s, 1, 1);
  ASSERT_EQ(same.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(same.samples[i].grid, s.samples[i].grid);
  // Same seed, same copies.
  const LabeledSet again = augment(s, 8, 1);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(again.samples[i].grid, a.samples[i].grid);
}

TEST(DatasetIo, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "scoopsim_dataset_test";
  std::filesystem::remove_all(dir);
  LabeledSet s;
  for (int i = 0; i < 4; ++i) {
    s.samples.push_back({constant_grid(i / 255.0 * 20), i % 2, static_cast<std::uint64_t>(100 + i), "tofu"});
  }
  save_dataset(s, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.csv"));
  const LabeledSet back = load_dataset(dir);
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back.samples[i].label, s.samples[i].label);
    EXPECT_EQ(back.samples[i].seed, s.samples[i].seed);
    EXPECT_EQ(back.samples[i].source, "tofu");
    EXPECT_NEAR(back.samples[i].grid.pixels[0], s.samples[i].grid.pixels[0], 0.5 / 255.0);
  }
  std::filesystem::remove_all(dir);
  try {
    load_dataset(dir);
    FAIL();
  } catch (const ScoopError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ModelMissing);
  }
}

TEST(ModelIo, RoundTripIsExact) {
  const auto path = std::filesystem::temp_directory_path() / "scoopsim_model_test.bin";
  BinaryClassifier m = random_model(ModelKind::OneHiddenLayer, kFeatureDim, 9);
  m.norm.mean.assign(kFeatureDim, 0.25);
  m.norm.stddev.assign(kFeatureDim, 0.5);
  m.threshold = 0.98;
  save_model(m, path);
  EXPECT_EQ(load_model(path), m);
  {
    std::ofstream os(path, std::ios::trunc);
    os << "{\"format\":\"something-else\"}\n";
  }
  try {
    load_model(path);
    FAIL();
  } catch (const ScoopError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidDataset);
  }
  std::filesystem::remove(path);
  try {
    load_model(path);
    FAIL();
  } catch (const ScoopError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ModelMissing);
  }
}
