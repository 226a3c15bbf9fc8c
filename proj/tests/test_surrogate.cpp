#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <fstream>

#include "support.hpp"

using namespace transit_robust;

namespace {

MlpModel random_model(Rng& rng, std::vector<std::size_t> sizes) {
  auto m = MlpModel::init(sizes, rng.next_u64());
  for (auto& b : m.biases) {
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform01() - 0.5;
  }
  return m;
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = (2.0 * rng.uniform01() - 1.0) * scale;
  }
  return m;
}

TrainConfig quick_config(int depth = 2, int width = 16) {
  TrainConfig c;
  c.depth = depth;
  c.width = width;
  c.phase1_epochs = 60;
  c.phase1_batch = 32;
  c.phase2_max_epochs = 100;
  c.phase2_batch = 64;
  c.patience = 10;
  c.adam.learning_rate = 3e-3;
  return c;
}

// Rows over `layout` with random inputs; labels depend on F9 only.
void synthetic_f9(const FeatureLayout& layout, std::size_t n, std::uint64_t seed, Rows& x, Rows& y) {
  Rng rng(seed);
  const auto& f9 = layout.segment(9);
  std::vector<std::array<double, 4>> coef(f9.length);
  for (auto& c : coef) {
    for (auto& v : c) v = rng.uniform01() * 10.0;
  }
  x.assign(n, std::vector<double>(layout.size()));
  y.assign(n, std::vector<double>(4, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x[i]) v = rng.uniform01();
    for (std::size_t k = 0; k < f9.length; ++k) {
      for (std::size_t t = 0; t < 4; ++t) y[i][t] += coef[k][t] * x[i][f9.offset + k];
    }
  }
}

}  // namespace

TEST(Forward, ZeroWeightsGiveOutputBias) {
  auto m = MlpModel::init({3, 4, 2}, 1);
  for (auto& w : m.weights) w.setZero();
  m.biases.back() << 1.5, -2.0;
  EXPECT_EQ(forward(m, std::vector<double>{1.0, 2.0, 3.0}), (std::vector<double>{1.5, -2.0}));
}

TEST(Forward, RectifierKillsNegatives) {
  auto m = MlpModel::init({1, 1, 1}, 1);
  m.weights[0](0, 0) = 1.0;
  m.weights[1](0, 0) = 1.0;
  EXPECT_EQ(forward(m, std::vector<double>{-3.0}), (std::vector<double>{0.0}));
  EXPECT_EQ(forward(m, std::vector<double>{3.0}), (std::vector<double>{3.0}));
}

TEST(Forward, HandSetTwoLayer) {
  auto m = MlpModel::init({2, 2, 1}, 1);
  m.weights[0] << 1.0, -1.0, 2.0, 0.5;
  m.biases[0] << 0.5, -4.0;
  m.weights[1] << 3.0, -1.0;
  m.biases[1] << 0.25;
  // x = (2, 1): hidden = relu(1.5, 0.5) ; out = 4.5 - 0.5 + 0.25
  EXPECT_DOUBLE_EQ(forward(m, std::vector<double>{2.0, 1.0})[0], 4.25);
  // x = (1, 3): hidden = relu(-1.5, -0.5) = 0 ; out = 0.25
  EXPECT_DOUBLE_EQ(forward(m, std::vector<double>{1.0, 3.0})[0], 0.25);
}

TEST(Forward, ShapeChecks) {
  const auto m = MlpModel::init({3, 2}, 1);
  EXPECT_THROW(forward(m, std::vector<double>{1.0}), ValidationError);
  EXPECT_THROW(MlpModel::init({3}, 1), ValidationError);
  EXPECT_THROW(MlpModel::init({3, 0, 1}, 1), ValidationError);
}

TEST(Forward, PiecewiseLinearAlongSegments) {
  Rng rng(8);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_model(rng, {4, 6, 6, 2});
    const Matrix a = random_matrix(rng, 4, 1), b = a + random_matrix(rng, 4, 1, 1e-3);
    // Same activation pattern at both ends -> linear between them.
    auto pattern = [&](const Matrix& x) {
      std::vector<bool> p;
      Matrix h = x;
      for (std::size_t k = 0; k + 1 < m.weights.size(); ++k) {
        h = m.weights[k] * h + m.biases[k];
        for (Eigen::Index i = 0; i < h.rows(); ++i) p.push_back(h(i, 0) > 0.0);
        h = h.cwiseMax(0.0);
      }
      return p;
    };
    if (pattern(a) != pattern(b) || pattern(a) != pattern((a + b) / 2)) continue;
    ++checked;
    const Matrix fa = forward_batch(m, a), fb = forward_batch(m, b), fm = forward_batch(m, (a + b) / 2);
    EXPECT_LT(((fa + fb) / 2 - fm).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_GT(checked, 150);
}

TEST(LossAndGrad, PerfectPrediction) {
  Rng rng(1);
  const auto m = random_model(rng, {3, 5, 2});
  const Matrix x = random_matrix(rng, 3, 7);
  const Matrix y = forward_batch(m, x);
  const auto lg = loss_and_grad(m, x, y);
  EXPECT_EQ(lg.loss, 0.0);
  for (const auto& g : lg.grad.weights) EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
  for (const auto& g : lg.grad.biases) EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LossAndGrad, SingleLinearUnit) {
  auto m = MlpModel::init({1, 1}, 1);
  m.weights[0](0, 0) = 2.0;
  Matrix x(1, 1), y(1, 1);
  x << 1.0;
  y << 0.0;
  const auto lg = loss_and_grad(m, x, y);
  EXPECT_DOUBLE_EQ(lg.loss, 4.0);
  EXPECT_DOUBLE_EQ(lg.grad.weights[0](0, 0), 4.0);
  EXPECT_DOUBLE_EQ(lg.grad.biases[0](0), 4.0);
}

TEST(LossAndGrad, MatchesFiniteDifferences) {
  Rng rng(2);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> sizes{static_cast<std::size_t>(rng.uniform_int(1, 5))};
    const auto depth = rng.uniform_int(0, 3);
    for (int k = 0; k < depth; ++k) sizes.push_back(static_cast<std::size_t>(rng.uniform_int(1, 8)));
    sizes.push_back(static_cast<std::size_t>(rng.uniform_int(1, 4)));
    auto m = random_model(rng, sizes);
    const auto n = rng.uniform_int(1, 6);
    const Matrix x = random_matrix(rng, static_cast<Eigen::Index>(sizes.front()), n);
    const Matrix y = random_matrix(rng, static_cast<Eigen::Index>(sizes.back()), n, 2.0);
    const auto lg = loss_and_grad(m, x, y);
    auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = loss_and_grad(m, x, y).loss;
      param = keep - h;
      const double down = loss_and_grad(m, x, y).loss;
      param = keep;
      const double numeric = (up - down) / (2 * h);
      EXPECT_LE(std::abs(analytic - numeric), std::max(1e-6, 1e-4 * std::max(std::abs(analytic), std::abs(numeric))));
    };
    for (std::size_t k = 0; k < m.weights.size(); ++k) {
      for (Eigen::Index i = 0; i < m.weights[k].size(); ++i) check(m.weights[k].data()[i], lg.grad.weights[k].data()[i]);
      for (Eigen::Index i = 0; i < m.biases[k].size(); ++i) check(m.biases[k].data()[i], lg.grad.biases[k].data()[i]);
    }
  }
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  std::vector<double> p{1.0, 1.0, 1.0}, g{0.3, -7.0, 1e-3}, m(3, 0.0), v(3, 0.0);
  AdamHyper h;
  h.learning_rate = 0.01;
  adam_update(p, g, m, v, 1, h);
  EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(p[1], 1.0 + 0.01, 1e-6);
  EXPECT_NEAR(p[2], 1.0 - 0.01, 1e-4);
}

TEST(Adam, ZeroGradientKeepsParameters) {
  std::vector<double> p{2.0}, g{0.0}, m{0.5}, v{0.25};
  adam_update(p, g, m, v, 3, AdamHyper{});
  EXPECT_NE(p[0], 2.0);  // momentum still moves it
  std::vector<double> q{2.0}, m0{0.0}, v0{0.0};
  adam_update(q, g, m0, v0, 1, AdamHyper{});
  EXPECT_EQ(q[0], 2.0);
  EXPECT_DOUBLE_EQ(m[0], 0.9 * 0.5);
  EXPECT_DOUBLE_EQ(v[0], 0.999 * 0.25);
}

TEST(Adam, MinimizesQuadratic) {
  std::vector<double> w{0.0}, m{0.0}, v{0.0};
  AdamHyper h;
  h.learning_rate = 0.1;
  for (long step = 1; step <= 100; ++step) {
    const std::vector<double> g{2.0 * (w[0] - 3.0)};
    adam_update(w, g, m, v, step, h);
  }
  EXPECT_NEAR(w[0], 3.0, 0.5);
}

TEST(Adam, ModelStepMatchesBlockUpdate) {
  Rng rng(4);
  auto model = random_model(rng, {3, 4, 2});
  auto copy = model;
  const auto lg = loss_and_grad(model, random_matrix(rng, 3, 5), random_matrix(rng, 2, 5));
  auto state = AdamState::zeros_like(model);
  adam_step(model, lg.grad, state, AdamHyper{});
  EXPECT_EQ(state.step, 1);
  std::vector<double> p(copy.weights[0].data(), copy.weights[0].data() + copy.weights[0].size());
  std::vector<double> g(lg.grad.weights[0].data(), lg.grad.weights[0].data() + lg.grad.weights[0].size());
  std::vector<double> m(p.size(), 0.0), v(p.size(), 0.0);
  adam_update(p, g, m, v, 1, AdamHyper{});
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], model.weights[0].data()[i]);
}

TEST(Train, ConstantLabels) {
  Rng rng(5);
  Rows x(200, std::vector<double>(6)), y(200, std::vector<double>{3.0, 7.0, 1.0, 5.0});
  for (auto& r : x) {
    for (auto& v : r) v = rng.uniform01();
  }
  TrainConfig cfg;
  cfg.phase2_max_epochs = 0;
  const auto res = train(x, y, cfg);
  ASSERT_EQ(res.history.size(), 150u);
  EXPECT_LT(res.history.back().train_loss, 1e-3);
  // Non-increasing over 10-epoch windows.
  for (std::size_t e = 20; e < res.history.size(); e += 10) EXPECT_LE(res.history[e].train_loss, res.history[e - 10].train_loss);
}

TEST(Train, LinearFunctionIsLearned) {
  Rng rng(6);
  const std::size_t n = 600;
  Rows x(n, std::vector<double>(8)), y(n, std::vector<double>(4));
  Matrix a = random_matrix(rng, 4, 5);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x[i]) v = 2.0 * rng.uniform01() - 1.0;
    for (int t = 0; t < 4; ++t) {
      double s = 0.0;
      for (int j = 0; j < 5; ++j) s += a(t, j) * x[i][static_cast<std::size_t>(j)];
      // Noise with sd 0.1 (uniform on +-0.1 sqrt 3).
      y[i][static_cast<std::size_t>(t)] = s + (2.0 * rng.uniform01() - 1.0) * 0.1 * std::sqrt(3.0);
    }
  }
  const auto [tr, te] = split_indices(n, 0.1, 9);
  Rows xtr, ytr, xte, yte;
  for (auto i : tr) xtr.push_back(x[i]), ytr.push_back(y[i]);
  for (auto i : te) xte.push_back(x[i]), yte.push_back(y[i]);
  auto cfg = quick_config(2, 32);
  cfg.phase2_max_epochs = 300;
  const auto model = train(xtr, ytr, cfg).model;
  double mse = 0.0;
  const auto pred = predict_rows(model, xte);
  for (std::size_t i = 0; i < te.size(); ++i) {
    for (int t = 0; t < 4; ++t) mse += std::pow(pred[i][static_cast<std::size_t>(t)] - yte[i][static_cast<std::size_t>(t)], 2);
  }
  mse /= static_cast<double>(te.size() * 4);
  EXPECT_LT(mse, 0.05);
}

TEST(Train, SameSeedSameHistory) {
  Rng rng(7);
  Rows x(120, std::vector<double>(5)), y(120, std::vector<double>(2));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (auto& v : x[i]) v = rng.uniform01();
    y[i] = {x[i][0] * 3.0, x[i][1] - x[i][2]};
  }
  auto cfg = quick_config();
  cfg.phase1_epochs = 10;
  cfg.phase2_max_epochs = 10;
  const auto a = train(x, y, cfg), b = train(x, y, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
    EXPECT_EQ(a.history[e].val_loss, b.history[e].val_loss);
  }
  for (std::size_t k = 0; k < a.model.weights.size(); ++k) EXPECT_TRUE(a.model.weights[k] == b.model.weights[k]);
  cfg.seed = 2;
  EXPECT_NE(train(x, y, cfg).history.back().train_loss, a.history.back().train_loss);
}

TEST(Train, RejectsBadInput) {
  Rows x(20, std::vector<double>(3, 1.0)), y(19, std::vector<double>(4, 0.0));
  EXPECT_THROW(train(x, y, quick_config()), ValidationError);
  y.push_back(y.back());
  auto cfg = quick_config();
  cfg.validation_fraction = 1.5;
  EXPECT_THROW(train(x, y, cfg), ValidationError);
  cfg = quick_config();
  cfg.adam.learning_rate = 1e200;
  for (std::size_t i = 0; i < x.size(); ++i) x[i][i % 3] = static_cast<double>(i), y[i][0] = 1.0;
  EXPECT_THROW(train(x, y, cfg), ValidationError);
}

TEST(Evaluate, ExactAndConstantPredictors) {
  const Rows labels{{0, 0, 0, 0}, {10, 10, 10, 10}, {0, 0, 0, 0}, {10, 10, 10, 10}};
  const auto exact = evaluate_predictions(labels, labels);
  EXPECT_EQ(exact.mean_mae, 0.0);
  EXPECT_EQ(exact.within_1, 1.0);
  EXPECT_EQ(exact.within_5, 1.0);
  const Rows constant(4, std::vector<double>(4, 5.0));
  const auto c = evaluate_predictions(constant, labels);
  EXPECT_DOUBLE_EQ(c.mean_mae, 5.0);
  EXPECT_DOUBLE_EQ(c.within_1, 0.0);
  EXPECT_DOUBLE_EQ(c.within_5, 1.0);
  EXPECT_DOUBLE_EQ(c.stddev[0], 0.0);
}

TEST(Evaluate, ShuffledLabelsAreWorse) {
  const auto layout = FeatureLayout::make(2, 3, FeatureCaps{10, 3, 6});
  Rows x, y;
  synthetic_f9(layout, 400, 11, x, y);
  const auto [tr, te] = split_indices(x.size(), 0.2, 3);
  Rows xtr, ytr, xte, yte, yshuf;
  for (auto i : tr) xtr.push_back(x[i]), ytr.push_back(y[i]);
  for (auto i : te) xte.push_back(x[i]), yte.push_back(y[i]);
  yshuf = ytr;
  Rng rng(4);
  rng.shuffle(yshuf);
  const auto good = evaluate_model(train(xtr, ytr, quick_config()).model, xte, yte);
  const auto bad = evaluate_model(train(xtr, yshuf, quick_config()).model, xte, yte);
  EXPECT_GT(bad.mean_mae, 3.0 * good.mean_mae);
}

TEST(Importance, EqualWeightsGiveEqualImportance) {
  const auto layout = FeatureLayout::make(2, 3, FeatureCaps{10, 3, 6});
  auto m = MlpModel::init({layout.size(), 4, 4}, 1);
  m.weights[0].setConstant(0.5);
  const auto imp = feature_importance(m, layout);
  for (double v : imp) EXPECT_DOUBLE_EQ(v, 4 * 0.5);
  const auto& s8 = layout.segment(8);
  for (std::size_t i = s8.offset; i < s8.offset + s8.length; ++i) m.weights[0].col(static_cast<Eigen::Index>(i)).setZero();
  EXPECT_EQ(feature_importance(m, layout)[7], 0.0);
  EXPECT_THROW(feature_importance(MlpModel::init({5, 2}, 1), layout), ValidationError);
}

TEST(Importance, SyntheticF9TaskRanksF9First) {
  const auto layout = FeatureLayout::make(4, 6, FeatureCaps{20, 4, 30});
  Rows x, y;
  synthetic_f9(layout, 500, 5, x, y);
  const auto model = train(x, y, quick_config(2, 32)).model;
  const auto imp = feature_importance(model, layout);
  for (int f = 1; f <= 8; ++f) EXPECT_GT(imp[8], imp[static_cast<std::size_t>(f - 1)]) << "F" << f;
}

TEST(Ablation, DropGroupsRemovesColumns) {
  const auto layout = FeatureLayout::make(2, 3, FeatureCaps{10, 3, 6});
  Rows rows{std::vector<double>(layout.size())};
  std::iota(rows[0].begin(), rows[0].end(), 0.0);
  const auto out = drop_feature_groups(rows, layout, {1, 9});
  ASSERT_EQ(out[0].size(), layout.size() - 3 - 6);
  EXPECT_EQ(out[0].front(), 3.0);
  EXPECT_EQ(out[0].back(), static_cast<double>(layout.segment(9).offset - 1));
}

TEST(Ablation, LeaveOneOutOnSyntheticTask) {
  const auto layout = FeatureLayout::make(3, 4, FeatureCaps{12, 3, 6});
  Rows x, y;
  synthetic_f9(layout, 800, 8, x, y);
  // Make F7 constant: removing it must not matter.
  const auto& s7 = layout.segment(7);
  for (auto& r : x) std::fill(r.begin() + static_cast<std::ptrdiff_t>(s7.offset), r.begin() + static_cast<std::ptrdiff_t>(s7.offset + s7.length), 2.0);
  const auto cfg = quick_config(2, 32);
  const auto res = leave_one_out_study(x, y, layout, cfg, 0.1);
  EXPECT_GT(res.mae_without[8], 5.0 * res.baseline_mae);
  EXPECT_LT(std::abs(res.mae_without[6] - res.baseline_mae), 0.5);
  EXPECT_EQ(leave_one_out_study(x, y, layout, cfg, 0.1).baseline_mae, res.baseline_mae);
}

TEST(Persistence, RoundTripIsBitIdentical) {
  Rng rng(12);
  Rows x(60, std::vector<double>(7)), y(60, std::vector<double>(4));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (auto& v : x[i]) v = rng.uniform01() * 100.0;
    y[i] = {x[i][0], x[i][1], x[i][2] / 3.0, 1.0 / 7.0};
  }
  auto cfg = quick_config();
  cfg.phase1_epochs = 5;
  cfg.phase2_max_epochs = 5;
  auto model = train(x, y, cfg).model;
  model.meta.label_reference = TestValues{1.0 / 3.0, 2.0, 3.0, 4.5};
  model.meta.excluded_features = {2, 5};
  const auto path = std::filesystem::temp_directory_path() / "tr_model_test" / "model.json";
  save_model(model, path);
  const auto loaded = load_model(path);
  for (const auto& r : x) EXPECT_EQ(predict(model, r), predict(loaded, r));
  EXPECT_EQ(loaded.sizes, model.sizes);
  EXPECT_EQ(loaded.meta.label_reference, model.meta.label_reference);
  EXPECT_EQ(loaded.meta.excluded_features, model.meta.excluded_features);
  EXPECT_EQ(loaded.meta.epochs_run, model.meta.epochs_run);
  std::filesystem::remove_all(path.parent_path());
}

TEST(Persistence, MalformedFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "tr_model_bad";
  std::filesystem::create_directories(dir);
  EXPECT_THROW(load_model(dir / "missing.json"), IoError);
  {
    std::ofstream(dir / "garbage.json") << "{not json";
  }
  EXPECT_THROW(load_model(dir / "garbage.json"), ValidationError);
  auto j = model_to_json(MlpModel::init({3, 2}, 1));
  j["layers"][0]["rows"] = 5;
  {
    std::ofstream(dir / "shape.json") << j.dump();
  }
  EXPECT_THROW(load_model(dir / "shape.json"), ValidationError);
  j = model_to_json(MlpModel::init({3, 2}, 1));
  j["format"] = "other";
  {
    std::ofstream(dir / "format.json") << j.dump();
  }
  EXPECT_THROW(load_model(dir / "format.json"), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST(Split, DeterministicPartition) {
  const auto [a, b] = split_indices(100, 0.1, 4);
  EXPECT_EQ(a.size(), 90u);
  EXPECT_EQ(b.size(), 10u);
  std::vector<std::size_t> all = a;
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(split_indices(100, 0.1, 4).second, b);
}
