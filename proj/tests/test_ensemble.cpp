#include <gtest/gtest.h>

#include <filesystem>
#include <vector>

#include "support.hpp"

using namespace pine;

namespace {

Tree depth_two() {
  Tree t;
  const auto [l, r] = t.split(0, 0, 0.5);
  const auto [ll, lr] = t.split(l, 1, 0.2);
  t.set_leaf(ll, {1.0, 0.0});
  t.set_leaf(lr, {0.0, 1.0});
  t.set_leaf(r, {0.5, 0.5});
  return t;
}

}  // namespace

TEST(Tree, BoundaryGoesLeft) {
  const auto t = Tree::stump(0, 0.5, {1.0, 0.0}, {0.0, 1.0});
  const std::vector<double> at{0.5}, above{0.5000001};
  EXPECT_EQ(t.leaf_scores(t.leaf_of(at))[0], 1.0);
  EXPECT_EQ(t.leaf_scores(t.leaf_of(above))[1], 1.0);
  const auto single = Tree::single_leaf({3.0, 4.0});
  EXPECT_EQ(single.leaf_of(at), 0);
}

TEST(Tree, HandTracedDepthTwo) {
  const auto t = depth_two();
  const std::vector<double> a{0.1, 0.1}, b{0.1, 0.9}, c{0.9, 0.0};
  EXPECT_EQ(t.leaf_scores(t.leaf_of(a)), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(t.leaf_scores(t.leaf_of(b)), (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(t.leaf_scores(t.leaf_of(c)), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(t.depth(), 2);
}

TEST(Predict, HandExamples) {
  const auto one = make_ensemble({Tree::single_leaf({0.3, -0.1})}, 2, 1);
  const std::vector<double> x{0.0};
  const auto s = predict_scores(one, std::vector<double>{2.0}, x);
  EXPECT_DOUBLE_EQ(s[0], 0.6);
  EXPECT_DOUBLE_EQ(s[1], -0.2);
  EXPECT_EQ(predict_scores(one, std::vector<double>{0.0}, x), (std::vector<double>{0.0, 0.0}));
  const auto two = make_ensemble({Tree::single_leaf({1.0, 0.0}), Tree::single_leaf({0.0, 1.0})}, 2, 1);
  EXPECT_EQ(predict_scores(two, two.weights, x), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(predict_class(two, two.weights, x), 0);  // tie to the smallest class
  EXPECT_THROW(predict_scores(two, std::vector<double>{1.0}, x), Error);
}

TEST(Predict, ArgmaxTieRule) {
  EXPECT_EQ(argmax_class(std::vector<double>{2.0, 2.0}), 0);
  EXPECT_EQ(argmax_class(std::vector<double>{0.0, 5.0, 3.0}), 1);
  EXPECT_EQ(argmax_class(std::vector<double>{1.0, 1.0, 1.0}), 0);
}

TEST(Predict, PiecewiseConstantLinearAndScaleInvariant) {
  SplitMix64 rng(3);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto inst = fixtures::random_instance(s);
    const auto& e = inst.ensemble;
    const auto theta = threshold_index(e);
    std::vector<double> w1(e.size()), w2(e.size());
    for (auto& v : w1) v = rng.uniform01();
    for (auto& v : w2) v = rng.uniform01();
    for (int k = 0; k < 50; ++k) {
      std::vector<double> x(static_cast<std::size_t>(e.n_features)), y(x.size());
      for (auto& v : x) v = rng.uniform(-0.5, 1.5);
      // A second point in the same cell, drawn inside each interval.
      const auto cell = theta.cell_of(x);
      for (std::size_t j = 0; j < x.size(); ++j) {
        const auto& t = theta[j];
        const double lo = cell[j] == 0 ? -1.0 : t[cell[j] - 1];
        const double hi = cell[j] == t.size() ? 2.0 : t[cell[j]];
        y[j] = cell[j] == t.size() ? rng.uniform(lo, hi) : hi - (hi - lo) * rng.uniform01() * 0.999;
      }
      ASSERT_EQ(theta.cell_of(y), cell);
      EXPECT_EQ(predict_scores(e, w1, x), predict_scores(e, w1, y));
      const double a = rng.uniform01(), b = rng.uniform01();
      std::vector<double> mix(e.size());
      for (std::size_t m = 0; m < mix.size(); ++m) mix[m] = a * w1[m] + b * w2[m];
      const auto f = predict_scores(e, mix, x), f1 = predict_scores(e, w1, x), f2 = predict_scores(e, w2, x);
      for (std::size_t c = 0; c < f.size(); ++c) EXPECT_NEAR(f[c], a * f1[c] + b * f2[c], 1e-12);
      std::vector<double> scaled(w1);
      for (auto& v : scaled) v *= 4.0;  // power of two keeps scores exact
      EXPECT_EQ(predict_class(e, scaled, x), predict_class(e, w1, x));
    }
  }
}

TEST(ThresholdIndex, UnionDedupAndExtras) {
  const auto e = make_ensemble({Tree::stump(0, 0.5, {1, 0}, {0, 1}), Tree::stump(0, 0.5, {0, 1}, {1, 0})}, 2, 2);
  const auto t = threshold_index(e);
  EXPECT_EQ(t[0], std::vector<double>{0.5});
  EXPECT_TRUE(t[1].empty());
  const auto aug = threshold_index(e, {{}, {1.0}});
  EXPECT_EQ(aug[1], std::vector<double>{1.0});
  EXPECT_THROW(threshold_index(e, {{std::nan("")}}), Error);
}

TEST(EnsembleJson, RoundTripRandom) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    auto e = fixtures::random_instance(s).ensemble;
    e.weights[0] = 0.1;
    e.bias[0] = 0.25;
    const auto back = ensemble_from_json(nlohmann::json::parse(ensemble_to_json(e).dump()));
    ASSERT_EQ(back.size(), e.size());
    for (std::size_t m = 0; m < e.size(); ++m) EXPECT_TRUE(back.trees[m] == e.trees[m]);
    EXPECT_EQ(back.weights, e.weights);
    EXPECT_EQ(back.bias, e.bias);
  }
}

TEST(EnsembleJson, FileRoundTripAndHandStump) {
  const auto path = (std::filesystem::temp_directory_path() / "pine_stump.json").string();
  write_file(path, R"({"n_features": 1, "n_classes": 2,
    "trees": [{"feature": 0, "threshold": 0.25, "left": {"leaf": [0.5, -0.5]}, "right": {"leaf": [-0.5, 0.5]}}]})");
  const auto e = load_ensemble(path);
  EXPECT_EQ(e.weights, std::vector<double>{1.0});
  EXPECT_EQ(predict_class(e, e.weights, std::vector<double>{0.25}), 0);
  EXPECT_EQ(predict_class(e, e.weights, std::vector<double>{0.3}), 1);
  save_ensemble(e, path);
  EXPECT_TRUE(load_ensemble(path).trees[0] == e.trees[0]);
  std::filesystem::remove(path);
}

TEST(EnsembleJson, SchemaErrors) {
  auto code = [](const char* text) {
    try {
      ensemble_from_json(nlohmann::json::parse(text));
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Inconsistent;
  };
  EXPECT_EQ(code(R"({"n_features": 1, "n_classes": 2})"), Errc::SchemaError);
  EXPECT_EQ(code(R"({"n_features": 1, "n_classes": 2, "trees": [{"leaf": [1]}]})"), Errc::SchemaError);
  EXPECT_EQ(code(R"({"n_features": 1, "n_classes": 2, "trees": [{"leaf": [1, 0]}], "weights": [-1]})"), Errc::SchemaError);
  EXPECT_EQ(code(R"({"n_features": 1, "n_classes": 2, "trees": [{"feature": 3, "threshold": 0, "left": {"leaf": [1, 0]}, "right": {"leaf": [1, 0]}}]})"),
            Errc::SchemaError);
}

TEST(TextDump, BinaryBoostersConvert) {
  const char* dump =
      "booster[0]:\n0:[f0<0.5] yes=1,no=2,missing=1\n\t1:leaf=0.4\n\t2:leaf=-0.2\n"
      "booster[1]:\n0:leaf=0.1\n";
  const auto e = convert_text_dump(dump, 1, 2, 0.0);
  ASSERT_EQ(e.size(), 2u);
  // x < 0.5 goes left in the dump; 0.5 itself goes right.
  const auto below = predict_scores(e, e.weights, std::vector<double>{0.4999});
  const auto at = predict_scores(e, e.weights, std::vector<double>{0.5});
  EXPECT_NEAR(below[1] - below[0], 0.5, 1e-12);
  EXPECT_NEAR(at[1] - at[0], -0.1, 1e-12);
  EXPECT_THROW(convert_text_dump("garbage", 1, 2), Error);
}

TEST(TextDump, MulticlassBoostersCycleClasses) {
  const char* dump = "booster[0]:\n0:leaf=1\nbooster[1]:\n0:leaf=2\nbooster[2]:\n0:leaf=3\nbooster[3]:\n0:leaf=4\n";
  const auto e = convert_text_dump(dump, 1, 3, 0.5);
  const auto f = predict_scores(e, e.weights, std::vector<double>{0.0});
  EXPECT_EQ(f, (std::vector<double>{5.5, 2.5, 3.5}));
}

TEST(Trainer, SeparableStumpMatchesExhaustiveSplitSearch) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const double cut = rng.uniform(0.2, 0.8);
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
      const double v = rng.uniform01();
      if (std::abs(v - cut) < 1e-3) continue;
      x.push_back(v);
      y.push_back(v > cut ? 1 : 0);
    }
    const Dataset d(1, x, y);
    // Oracle: some threshold between sorted neighbours separates the classes.
    std::vector<std::pair<double, int>> s;
    for (std::size_t i = 0; i < x.size(); ++i) s.push_back({x[i], y[i]});
    std::sort(s.begin(), s.end());
    std::size_t best = 0;
    for (std::size_t k = 0; k <= s.size(); ++k) {
      std::size_t ok = 0;
      for (std::size_t i = 0; i < s.size(); ++i) ok += (i < k ? 0 : 1) == s[i].second;
      best = std::max(best, ok);
    }
    TrainParams tp;
    tp.rounds = 1;
    tp.max_depth = 1;
    const auto e = train_boosted(d, tp);
    std::size_t right = 0;
    for (std::size_t i = 0; i < d.n_rows(); ++i) right += predict_class(e, e.weights, d.row(i)) == d.label(i);
    EXPECT_EQ(right, best);
    EXPECT_EQ(right, d.n_rows());
  }
}

TEST(Trainer, DeterministicAndValidated) {
  const auto d = gen_moons({120, 0.2, 1});
  TrainParams tp;
  tp.rounds = 5;
  tp.subsample = 0.7;
  tp.seed = 3;
  const auto a = train_boosted(d, tp), b = train_boosted(d, tp);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t m = 0; m < a.size(); ++m) {
    EXPECT_TRUE(a.trees[m] == b.trees[m]);
    EXPECT_LE(a.trees[m].depth(), 2);
  }
  tp.rounds = 0;
  EXPECT_THROW(train_boosted(d, tp), Error);
  try {
    train_boosted(Dataset(1, {1.0, 2.0}, {0, 0}), TrainParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateLabels);
  }
}

TEST(Trainer, MulticlassBuildsOneTreePerClassPerRound) {
  std::vector<double> x;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(i / 60.0);
    y.push_back(i / 20);
  }
  TrainParams tp;
  tp.rounds = 4;
  const auto e = train_boosted(Dataset(1, x, y), tp);
  EXPECT_EQ(e.size(), 12u);
  std::size_t right = 0;
  for (std::size_t i = 0; i < x.size(); ++i) right += predict_class(e, e.weights, std::vector<double>{x[i]}) == y[i];
  EXPECT_GE(right, 55u);
}
