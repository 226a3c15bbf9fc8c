#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "transit_robust/base64.hpp"
#include "transit_robust/common.hpp"
#include "transit_robust/features.hpp"
#include "transit_robust/rng.hpp"

namespace transit_robust {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ModelMetadata {
  std::string dataset_id;
  FeatureCaps caps;
  std::size_t stations = 0;
  std::size_t edges = 0;
  std::uint64_t training_seed = 0;
  int epochs_run = 0;
  std::string label_kind = "normalized";
  std::optional<std::array<double, 4>> label_reference;  // per-test max raw value of the training corpus
  std::vector<int> excluded_features;                    // feature groups removed from the input
};

// Feedforward regressor: rectifier on hidden layers, identity on the output.
// weights[k] maps layer k (sizes[k]) to layer k+1 (sizes[k+1]).
struct MlpModel {
  std::vector<std::size_t> sizes;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Scaler scaler;  // empty scaler means inputs are used as given
  ModelMetadata meta;

  std::size_t input_size() const { return sizes.front(); }
  std::size_t output_size() const { return sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t hidden_layers() const { return weights.size() - 1; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) n += static_cast<std::size_t>(weights[k].size() + biases[k].size());
    return n;
  }

  // Uniform fan-in initialization U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  static MlpModel init(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw ValidationError("model needs at least input and output layer");
    for (auto s : layer_sizes) {
      if (s == 0) throw ValidationError("layer size must be positive");
    }
    MlpModel m;
    m.sizes = std::move(layer_sizes);
    Rng rng(seed);
    for (std::size_t k = 0; k + 1 < m.sizes.size(); ++k) {
      const auto in = static_cast<Eigen::Index>(m.sizes[k]);
      const auto out = static_cast<Eigen::Index>(m.sizes[k + 1]);
      const double limit = std::sqrt(6.0 / static_cast<double>(in));
      Matrix w(out, in);
      for (Eigen::Index j = 0; j < in; ++j) {
        for (Eigen::Index i = 0; i < out; ++i) w(i, j) = (2.0 * rng.uniform01() - 1.0) * limit;
      }
      m.weights.push_back(std::move(w));
      m.biases.push_back(Vector::Zero(out));
    }
    return m;
  }

  void check_shapes() const {
    if (weights.size() != biases.size() || weights.size() + 1 != sizes.size()) throw ValidationError("model layer count mismatch");
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (static_cast<std::size_t>(weights[k].cols()) != sizes[k] || static_cast<std::size_t>(weights[k].rows()) != sizes[k + 1] ||
          static_cast<std::size_t>(biases[k].size()) != sizes[k + 1]) {
        throw ValidationError("model layer " + std::to_string(k) + " has incompatible dimensions");
      }
      if (!weights[k].allFinite() || !biases[k].allFinite()) throw ValidationError("model layer " + std::to_string(k) + " has non-finite parameters");
    }
  }
};

// Column-major batch: one sample per column.
inline Matrix forward_batch(const MlpModel& model, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != model.input_size()) {
    throw ValidationError("input has " + std::to_string(inputs.rows()) + " features, model expects " + std::to_string(model.input_size()));
  }
  Matrix a = inputs;
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    Matrix z = model.weights[k] * a;
    z.colwise() += model.biases[k];
    if (k + 1 < model.weights.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

inline std::vector<double> forward(const MlpModel& model, std::span<const double> scaled_input) {
  const Matrix x = Eigen::Map<const Matrix>(scaled_input.data(), static_cast<Eigen::Index>(scaled_input.size()), 1);
  const Matrix y = forward_batch(model, x);
  return std::vector<double>(y.data(), y.data() + y.size());
}

// Applies the embedded scaler, then forward().
inline std::vector<double> predict(const MlpModel& model, std::span<const double> features) {
  if (model.scaler.size() == 0) return forward(model, features);
  const auto scaled = model.scaler.apply(features);
  return forward(model, scaled);
}

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

struct LossAndGradient {
  double loss = 0.0;
  Gradients grad;
};

// Mean squared error over samples and outputs with exact reverse-mode
// gradients.
inline LossAndGradient loss_and_grad(const MlpModel& model, const Matrix& inputs, const Matrix& targets) {
  if (inputs.cols() == 0) throw ValidationError("empty batch");
  if (inputs.cols() != targets.cols()) throw ValidationError("input and target batch sizes differ");
  if (static_cast<std::size_t>(targets.rows()) != model.output_size()) throw ValidationError("target dimension does not match model output");
  if (static_cast<std::size_t>(inputs.rows()) != model.input_size()) throw ValidationError("input dimension does not match model");
  const std::size_t L = model.weights.size();
  std::vector<Matrix> act(L + 1);  // act[0] = inputs, act[k] = output of layer k
  act[0] = inputs;
  for (std::size_t k = 0; k < L; ++k) {
    Matrix z = model.weights[k] * act[k];
    z.colwise() += model.biases[k];
    if (k + 1 < L) z = z.cwiseMax(0.0);
    act[k + 1] = std::move(z);
  }
  const double denom = static_cast<double>(targets.cols() * targets.rows());
  const Matrix diff = act[L] - targets;
  LossAndGradient out;
  out.loss = diff.squaredNorm() / denom;
  out.grad.weights.resize(L);
  out.grad.biases.resize(L);
  Matrix delta = (2.0 / denom) * diff;
  for (std::size_t k = L; k-- > 0;) {
    out.grad.weights[k].noalias() = delta * act[k].transpose();
    out.grad.biases[k] = delta.rowwise().sum();
    if (k > 0) {
      Matrix back = model.weights[k].transpose() * delta;
      // Rectifier derivative: 1 where the hidden activation is positive.
      delta = back.cwiseProduct((act[k].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam update of one parameter block; `step` is the 1-based
// step count after increment.
inline void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v, long step,
                        const AdamHyper& h) {
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * grads[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    params[i] -= h.learning_rate * mhat / (std::sqrt(vhat) + h.epsilon);
  }
}

struct AdamState {
  Gradients m;
  Gradients v;
  long step = 0;

  static AdamState zeros_like(const MlpModel& model) {
    AdamState s;
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
      s.m.weights.push_back(Matrix::Zero(model.weights[k].rows(), model.weights[k].cols()));
      s.m.biases.push_back(Vector::Zero(model.biases[k].size()));
    }
    s.v = s.m;
    return s;
  }
};

inline void adam_step(MlpModel& model, const Gradients& g, AdamState& state, const AdamHyper& h) {
  if (g.weights.size() != model.weights.size() || state.m.weights.size() != model.weights.size()) throw ValidationError("adam: shape mismatch");
  ++state.step;
  auto span_of = [](auto& x) { return std::span<std::remove_reference_t<decltype(*x.data())>>(x.data(), static_cast<std::size_t>(x.size())); };
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    if (g.weights[k].size() != model.weights[k].size() || g.biases[k].size() != model.biases[k].size()) throw ValidationError("adam: shape mismatch");
    adam_update(span_of(model.weights[k]), std::span<const double>(g.weights[k].data(), static_cast<std::size_t>(g.weights[k].size())),
                span_of(state.m.weights[k]), span_of(state.v.weights[k]), state.step, h);
    adam_update(span_of(model.biases[k]), std::span<const double>(g.biases[k].data(), static_cast<std::size_t>(g.biases[k].size())),
                span_of(state.m.biases[k]), span_of(state.v.biases[k]), state.step, h);
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int depth = 5;
  int width = 128;
  int phase1_epochs = 150;
  int phase1_batch = 100;
  int phase2_max_epochs = 1000;
  int phase2_batch = 300;
  int patience = 20;
  double validation_fraction = 0.11;
  AdamHyper adam;
  std::uint64_t seed = 1;
  std::function<void(int epoch, int phase, double train_loss, double val_loss)> on_epoch;

  void validate() const {
    if (depth < 0 || width < 1) throw ValidationError("invalid network shape");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) throw ValidationError("validation fraction must lie in (0, 1)");
    if (phase1_epochs < 0 || phase2_max_epochs < 0 || phase1_batch < 1 || phase2_batch < 1 || patience < 1) throw ValidationError("invalid epoch/batch settings");
  }
};

struct EpochRecord {
  int epoch = 0;
  int phase = 1;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochRecord> history;
};

using Rows = std::vector<std::vector<double>>;

inline Matrix to_columns(const Rows& rows, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return Matrix(0, 0);
  const auto d = static_cast<Eigen::Index>(rows[idx.front()].size());
  Matrix m(d, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const auto& r = rows[idx[c]];
    if (static_cast<Eigen::Index>(r.size()) != d) throw ValidationError("ragged matrix");
    for (Eigen::Index j = 0; j < d; ++j) m(j, static_cast<Eigen::Index>(c)) = r[static_cast<std::size_t>(j)];
  }
  return m;
}

// Deterministic shuffle-split: returns (kept, held_out) index lists.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double held_out_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  auto held = static_cast<std::size_t>(std::llround(held_out_fraction * static_cast<double>(n)));
  held = std::min(held, n);
  std::vector<std::size_t> rest(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> out(idx.end() - static_cast<std::ptrdiff_t>(held), idx.end());
  return {rest, out};
}

// Phase 1 runs phase1_epochs with mini-batches of phase1_batch; phase 2 runs
// up to phase2_max_epochs with phase2_batch and stops once the epoch training
// loss has not improved for `patience` epochs. Adam state is reset between
// phases. The scaler is fitted on the training part only.
inline TrainResult train(const Rows& features, const Rows& labels, const TrainConfig& cfg) {
  cfg.validate();
  if (features.size() != labels.size()) throw ValidationError("feature and label row counts differ");
  if (features.size() < 10) throw ValidationError("training needs at least 10 rows");
  const auto [train_idx, val_idx] = split_indices(features.size(), cfg.validation_fraction, mix_seed(cfg.seed, 1));

  Rows train_rows;
  train_rows.reserve(train_idx.size());
  for (auto i : train_idx) train_rows.push_back(features[i]);
  TrainResult res;
  const Scaler scaler = Scaler::fit(train_rows);
  Rows scaled(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) scaled[i] = scaler.apply(features[i]);

  std::vector<std::size_t> sizes{features.front().size()};
  for (int k = 0; k < cfg.depth; ++k) sizes.push_back(static_cast<std::size_t>(cfg.width));
  sizes.push_back(labels.front().size());
  res.model = MlpModel::init(sizes, mix_seed(cfg.seed, 2));
  res.model.scaler = scaler;
  res.model.meta.training_seed = cfg.seed;
  // Output biases start at the training label mean.
  for (auto i : train_idx) {
    for (std::size_t t = 0; t < labels[i].size(); ++t) res.model.biases.back()(static_cast<Eigen::Index>(t)) += labels[i][t];
  }
  res.model.biases.back() /= static_cast<double>(train_idx.size());

  const Matrix x_val = to_columns(scaled, val_idx);
  const Matrix y_val = to_columns(labels, val_idx);
  Rng shuffle_rng(mix_seed(cfg.seed, 3));
  std::vector<std::size_t> order = train_idx;
  int epoch = 0;

  auto run_epoch = [&](int batch_size, AdamState& adam) {
    shuffle_rng.shuffle(order);
    const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(batch_size), order.size());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(stop));
      const auto lg = loss_and_grad(res.model, to_columns(scaled, batch), to_columns(labels, batch));
      if (!std::isfinite(lg.loss)) {
        throw ValidationError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) + " (check feature scaling and learning rate)");
      }
      loss_sum += lg.loss * static_cast<double>(stop - start);
      adam_step(res.model, lg.grad, adam, cfg.adam);
    }
    return loss_sum / static_cast<double>(order.size());
  };
  auto val_loss = [&] {
    if (x_val.cols() == 0) return 0.0;
    return (forward_batch(res.model, x_val) - y_val).squaredNorm() / static_cast<double>(y_val.size());
  };
  auto record = [&](int phase, double tl) {
    const double vl = val_loss();
    res.history.push_back({epoch, phase, tl, vl});
    if (cfg.on_epoch) cfg.on_epoch(epoch, phase, tl, vl);
  };

  AdamState adam = AdamState::zeros_like(res.model);
  for (int e = 0; e < cfg.phase1_epochs; ++e) {
    ++epoch;
    record(1, run_epoch(cfg.phase1_batch, adam));
  }
  adam = AdamState::zeros_like(res.model);
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int e = 0; e < cfg.phase2_max_epochs; ++e) {
    ++epoch;
    const double tl = run_epoch(cfg.phase2_batch, adam);
    record(2, tl);
    if (tl < best) {
      best = tl;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  res.model.meta.epochs_run = epoch;
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation and feature analysis
// ---------------------------------------------------------------------------

struct EvaluationReport {
  std::vector<double> mae;     // per output
  std::vector<double> stddev;  // of absolute errors, per output
  double mean_mae = 0.0;
  double within_1 = 0.0;  // share of (row, output) pairs with |error| <= 1
  double within_5 = 0.0;
  std::size_t rows = 0;
};

inline EvaluationReport evaluate_predictions(const Rows& predictions, const Rows& labels) {
  if (predictions.size() != labels.size() || labels.empty()) throw ValidationError("evaluation needs equally many non-empty prediction and label rows");
  const std::size_t o = labels.front().size();
  EvaluationReport r;
  r.rows = labels.size();
  r.mae.assign(o, 0.0);
  r.stddev.assign(o, 0.0);
  std::size_t in1 = 0, in5 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t t = 0; t < o; ++t) {
      const double err = std::abs(predictions[i][t] - labels[i][t]);
      r.mae[t] += err;
      if (err <= 1.0) ++in1;
      if (err <= 5.0) ++in5;
    }
  }
  const double n = static_cast<double>(labels.size());
  for (auto& v : r.mae) v /= n;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t t = 0; t < o; ++t) {
      const double d = std::abs(predictions[i][t] - labels[i][t]) - r.mae[t];
      r.stddev[t] += d * d;
    }
  }
  for (auto& v : r.stddev) v = std::sqrt(v / n);
  r.mean_mae = std::accumulate(r.mae.begin(), r.mae.end(), 0.0) / static_cast<double>(o);
  r.within_1 = static_cast<double>(in1) / (n * static_cast<double>(o));
  r.within_5 = static_cast<double>(in5) / (n * static_cast<double>(o));
  return r;
}

inline Rows predict_rows(const MlpModel& model, const Rows& features) {
  Rows out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(predict(model, f));
  return out;
}

inline EvaluationReport evaluate_model(const MlpModel& model, const Rows& features, const Rows& labels) {
  return evaluate_predictions(predict_rows(model, features), labels);
}

// Sum of absolute outgoing first-layer weights per input node, averaged over
// the nodes of each key-feature group.
inline std::array<double, kFeatureGroupCount> feature_importance(const MlpModel& model, const FeatureLayout& layout) {
  if (model.input_size() != layout.size()) throw ValidationError("model input size does not match the feature layout");
  const Matrix& w = model.weights.front();
  std::array<double, kFeatureGroupCount> out{};
  for (const auto& s : layout.segments) {
    double sum = 0.0;
    for (std::size_t i = s.offset; i < s.offset + s.length; ++i) sum += w.col(static_cast<Eigen::Index>(i)).cwiseAbs().sum();
    out[static_cast<std::size_t>(s.feature - 1)] = s.length > 0 ? sum / static_cast<double>(s.length) : 0.0;
  }
  return out;
}

// Drops the columns of the given feature groups.
inline Rows drop_feature_groups(const Rows& rows, const FeatureLayout& layout, const std::vector<int>& groups) {
  std::vector<bool> keep(layout.size(), true);
  for (int g : groups) {
    const auto& s = layout.segment(g);
    for (std::size_t i = s.offset; i < s.offset + s.length; ++i) keep[i] = false;
  }
  Rows out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.size() != layout.size()) throw ValidationError("feature row does not match layout");
    std::vector<double> v;
    v.reserve(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (keep[i]) v.push_back(r[i]);
    }
    out.push_back(std::move(v));
  }
  return out;
}

struct AblationResult {
  double baseline_mae = 0.0;
  std::array<double, kFeatureGroupCount> mae_without{};
};

// Retrains once per removed feature group on a fixed train/test split and
// reports the held-out mean absolute error.
inline AblationResult leave_one_out_study(const Rows& features, const Rows& labels, const FeatureLayout& layout, const TrainConfig& cfg,
                                          double test_fraction = 0.1) {
  const auto [train_idx, test_idx] = split_indices(features.size(), test_fraction, mix_seed(cfg.seed, 17));
  if (test_idx.empty()) throw ValidationError("ablation needs a non-empty test split");
  auto subset = [](const Rows& rows, const std::vector<std::size_t>& idx) {
    Rows out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(rows[i]);
    return out;
  };
  const Rows y_train = subset(labels, train_idx);
  const Rows y_test = subset(labels, test_idx);
  auto run = [&](const std::vector<int>& dropped) {
    const Rows x = dropped.empty() ? features : drop_feature_groups(features, layout, dropped);
    const auto model = train(subset(x, train_idx), y_train, cfg).model;
    return evaluate_model(model, subset(x, test_idx), y_test).mean_mae;
  };
  AblationResult r;
  r.baseline_mae = run({});
  for (int f = 1; f <= kFeatureGroupCount; ++f) r.mae_without[static_cast<std::size_t>(f - 1)] = run({f});
  return r;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline constexpr const char* kModelFormat = "transit-robust-mlp";
inline constexpr int kModelVersion = 1;

inline nlohmann::json model_to_json(const MlpModel& m) {
  using nlohmann::json;
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["layer_sizes"] = m.sizes;
  j["activation"] = {{"hidden", "relu"}, {"output", "linear"}};
  json layers = json::array();
  for (std::size_t k = 0; k < m.weights.size(); ++k) {
    // Weights stored row-major (output index major).
    std::vector<double> w(static_cast<std::size_t>(m.weights[k].size()));
    for (Eigen::Index r = 0; r < m.weights[k].rows(); ++r) {
      for (Eigen::Index c = 0; c < m.weights[k].cols(); ++c) w[static_cast<std::size_t>(r * m.weights[k].cols() + c)] = m.weights[k](r, c);
    }
    layers.push_back({{"rows", m.weights[k].rows()},
                      {"cols", m.weights[k].cols()},
                      {"weights", base64::encode_doubles(w)},
                      {"bias", base64::encode_doubles(std::span<const double>(m.biases[k].data(), static_cast<std::size_t>(m.biases[k].size())))}});
  }
  j["layers"] = layers;
  j["scaler"] = {{"mean", base64::encode_doubles(m.scaler.mean)}, {"stddev", base64::encode_doubles(m.scaler.stddev)}};
  json meta;
  meta["dataset_id"] = m.meta.dataset_id;
  meta["caps"] = {{"traveltime_max", m.meta.caps.traveltime_max}, {"transfers_max", m.meta.caps.transfers_max}, {"turnaround_max", m.meta.caps.turnaround_max}};
  meta["stations"] = m.meta.stations;
  meta["edges"] = m.meta.edges;
  meta["training_seed"] = m.meta.training_seed;
  meta["epochs_run"] = m.meta.epochs_run;
  meta["label_kind"] = m.meta.label_kind;
  if (m.meta.label_reference) meta["label_reference"] = base64::encode_doubles(*m.meta.label_reference);
  meta["excluded_features"] = m.meta.excluded_features;
  j["metadata"] = meta;
  return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw ValidationError("not a model file");
    if (j.at("version").get<int>() != kModelVersion) throw ValidationError("unsupported model version " + std::to_string(j.at("version").get<int>()));
    MlpModel m;
    m.sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    for (const auto& l : j.at("layers")) {
      const auto rows = l.at("rows").get<Eigen::Index>();
      const auto cols = l.at("cols").get<Eigen::Index>();
      const auto w = base64::decode_doubles(l.at("weights").get<std::string>());
      const auto b = base64::decode_doubles(l.at("bias").get<std::string>());
      if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) throw ValidationError("model layer blob size mismatch");
      Matrix wm(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) wm(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      }
      m.weights.push_back(std::move(wm));
      m.biases.push_back(Eigen::Map<const Vector>(b.data(), rows));
    }
    m.scaler.mean = base64::decode_doubles(j.at("scaler").at("mean").get<std::string>());
    m.scaler.stddev = base64::decode_doubles(j.at("scaler").at("stddev").get<std::string>());
    const auto& meta = j.at("metadata");
    m.meta.dataset_id = meta.value("dataset_id", "");
    const auto& caps = meta.at("caps");
    m.meta.caps = {caps.at("traveltime_max").get<int>(), caps.at("transfers_max").get<int>(), caps.at("turnaround_max").get<int>()};
    m.meta.stations = meta.value("stations", std::size_t{0});
    m.meta.edges = meta.value("edges", std::size_t{0});
    m.meta.training_seed = meta.value("training_seed", std::uint64_t{0});
    m.meta.epochs_run = meta.value("epochs_run", 0);
    m.meta.label_kind = meta.value("label_kind", "normalized");
    if (meta.contains("label_reference")) {
      const auto ref = base64::decode_doubles(meta.at("label_reference").get<std::string>());
      if (ref.size() != 4) throw ValidationError("label reference must have 4 entries");
      m.meta.label_reference = std::array<double, 4>{ref[0], ref[1], ref[2], ref[3]};
    }
    m.meta.excluded_features = meta.value("excluded_features", std::vector<int>{});
    m.check_shapes();
    if (m.scaler.mean.size() != m.input_size() && !m.scaler.mean.empty()) throw ValidationError("scaler size does not match model input");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const MlpModel& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp);
    out << model_to_json(m).dump(1) << '\n';
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move model into place: " + ec.message());
}

inline MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file is not valid JSON: " + std::string(e.what()));
  }
  return model_from_json(j);
}

}  // namespace transit_robust
