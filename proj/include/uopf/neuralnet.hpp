#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uopf/error.hpp"
#include "uopf/layout.hpp"
#include "uopf/random.hpp"

namespace uopf {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Unified elastic network. Parameters live in `blocks`, in this order:
///   input column blocks 0..K-1 (hidden[0] x input_block(k)),
///   first-layer bias (hidden[0] x 1),
///   trunk weight/bias pairs (hidden[i+1] x hidden[i], hidden[i+1] x 1),
///   output row blocks 0..K-1 as weight/bias pairs (output_block(k) x hidden.back(), x 1).
/// Network k uses input and output blocks 0..k plus the whole trunk. Inputs and
/// outputs are in the packed order of `packed_order`.
template <class T>
struct ElasticDnn {
  SlotMaps slots;
  std::vector<int> hidden;
  std::vector<Mat<T>> blocks;

  int networks() const { return slots.size(); }
  int in_len(int k) const { return slots.inputs[k]; }
  int out_len(int k) const { return slots.outputs[k]; }
  int trunk_layers() const { return static_cast<int>(hidden.size()) - 1; }

  int input_id(int k) const { return k; }
  int bias1_id() const { return networks(); }
  int trunk_weight_id(int i) const { return networks() + 1 + 2 * i; }
  int trunk_bias_id(int i) const { return networks() + 2 + 2 * i; }
  int output_weight_id(int k) const { return networks() + 1 + 2 * trunk_layers() + 2 * k; }
  int output_bias_id(int k) const { return output_weight_id(k) + 1; }

  /// Block ids network k touches, in declared order.
  std::vector<int> active_ids(int k) const {
    std::vector<int> ids;
    for (int j = 0; j <= k; ++j) ids.push_back(input_id(j));
    for (int id = bias1_id(); id < output_weight_id(0); ++id) ids.push_back(id);
    for (int j = 0; j <= k; ++j) {
      ids.push_back(output_weight_id(j));
      ids.push_back(output_bias_id(j));
    }
    return ids;
  }

  /// Block id -> owning network, or -1 for the shared trunk.
  int owner(int id) const {
    if (id < bias1_id()) return id;
    if (id >= output_weight_id(0)) return (id - output_weight_id(0)) / 2;
    return -1;
  }

  template <class U>
  ElasticDnn<U> cast() const {
    ElasticDnn<U> out{slots, hidden, {}};
    for (const auto& b : blocks) out.blocks.push_back(b.template cast<U>());
    return out;
  }

  bool operator==(const ElasticDnn& o) const {
    if (slots != o.slots || hidden != o.hidden || blocks.size() != o.blocks.size()) return false;
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i].rows() != o.blocks[i].rows() || blocks[i].cols() != o.blocks[i].cols() ||
          blocks[i] != o.blocks[i])
        return false;
    return true;
  }
};

/// He-uniform weights for the ReLU layers (fan-in of the largest network for
/// the elastic input layer), Xavier-uniform for the sigmoid output blocks,
/// zero biases.
template <class T = double>
ElasticDnn<T> init_elastic_dnn(const SlotMaps& slots, const std::vector<int>& hidden, std::uint64_t seed) {
  slots.validate();
  if (hidden.empty()) throw Error(ErrorCode::InvalidSlotMap, "need at least one hidden layer");
  for (int h : hidden)
    if (h <= 0) throw Error(ErrorCode::InvalidSlotMap, "hidden widths must be positive");
  ElasticDnn<T> d{slots, hidden, {}};
  const int K = slots.size();
  std::mt19937_64 rng(seed);
  auto uniform = [&](int rows, int cols, double limit) {
    Mat<T> m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = static_cast<T>(limit * (2.0 * unit_draw(rng()) - 1.0));
    return m;
  };
  const double in_limit = std::sqrt(6.0 / slots.inputs[K - 1]);
  for (int k = 0; k < K; ++k) d.blocks.push_back(uniform(hidden[0], slots.input_block(k), in_limit));
  d.blocks.push_back(Mat<T>::Zero(hidden[0], 1));
  for (std::size_t i = 0; i + 1 < hidden.size(); ++i) {
    d.blocks.push_back(uniform(hidden[i + 1], hidden[i], std::sqrt(6.0 / hidden[i])));
    d.blocks.push_back(Mat<T>::Zero(hidden[i + 1], 1));
  }
  const double out_limit = std::sqrt(6.0 / (hidden.back() + slots.outputs[K - 1]));
  for (int k = 0; k < K; ++k) {
    d.blocks.push_back(uniform(slots.output_block(k), hidden.back(), out_limit));
    d.blocks.push_back(Mat<T>::Zero(slots.output_block(k), 1));
  }
  return d;
}

/// Activations kept for backpropagation; `layers[0]` is the first hidden
/// layer output.
template <class T>
struct ForwardCache {
  std::vector<Mat<T>> layers;
  Mat<T> output;
};

/// Batched forward pass, one sample per column. Throws LengthMismatch.
template <class T>
Mat<T> forward(const ElasticDnn<T>& d, int k, const Mat<T>& u, ForwardCache<T>* cache = nullptr) {
  if (k < 0 || k >= d.networks())
    throw Error(ErrorCode::LengthMismatch, "network index " + std::to_string(k) + " out of range");
  if (u.rows() != d.in_len(k))
    throw Error(ErrorCode::LengthMismatch, "input length " + std::to_string(u.rows()) + ", network " +
                                               std::to_string(k) + " expects " + std::to_string(d.in_len(k)));
  const auto batch = u.cols();
  Mat<T> a = d.blocks[d.bias1_id()].replicate(1, batch);
  for (int j = 0, off = 0; j <= k; off += d.slots.input_block(j), ++j)
    a.noalias() += d.blocks[d.input_id(j)] * u.middleRows(off, d.slots.input_block(j));
  a = a.cwiseMax(T(0));
  std::vector<Mat<T>> layers;
  for (int i = 0; i < d.trunk_layers(); ++i) {
    Mat<T> z = d.blocks[d.trunk_bias_id(i)].replicate(1, batch);
    z.noalias() += d.blocks[d.trunk_weight_id(i)] * a;
    if (cache) layers.push_back(std::move(a));
    a = z.cwiseMax(T(0));
  }
  Mat<T> y(d.out_len(k), batch);
  for (int j = 0, off = 0; j <= k; off += d.slots.output_block(j), ++j) {
    auto rows = y.middleRows(off, d.slots.output_block(j));
    rows = d.blocks[d.output_bias_id(j)].replicate(1, batch);
    rows.noalias() += d.blocks[d.output_weight_id(j)] * a;
  }
  y = (T(1) / (T(1) + (-y.array()).exp())).matrix();
  if (cache) {
    layers.push_back(std::move(a));
    cache->layers = std::move(layers);
    cache->output = y;
  }
  return y;
}

/// Per-row loss weights of network k: 1 on vm rows, gamma on va rows.
template <class T>
Eigen::Matrix<T, Eigen::Dynamic, 1> loss_weights(const SlotMaps& slots, int k, double gamma) {
  Eigen::Matrix<T, Eigen::Dynamic, 1> w(slots.outputs[k]);
  for (int j = 0, off = 0; j <= k; off += slots.output_block(j), ++j) {
    const int half = slots.output_block(j) / 2;
    w.segment(off, half).setOnes();
    w.segment(off + half, half).setConstant(static_cast<T>(gamma));
  }
  return w;
}

/// Gradient entries for the blocks of one network only.
template <class T>
struct Gradients {
  std::vector<int> ids;
  std::vector<Mat<T>> values;
};

/// Batch mean of sum_vm (yhat - y)^2 + gamma sum_va (yhat - y)^2.
template <class T>
double batch_loss(const ElasticDnn<T>& d, int k, const Mat<T>& u, const Mat<T>& target, double gamma) {
  if (target.rows() != d.out_len(k) || target.cols() != u.cols())
    throw Error(ErrorCode::LengthMismatch, "target shape does not match network " + std::to_string(k));
  const auto y = forward(d, k, u);
  const auto w = loss_weights<T>(d.slots, k, gamma);
  return static_cast<double>(((y - target).array().square().colwise() * w.array()).sum()) /
         static_cast<double>(u.cols());
}

template <class T>
double loss_and_grads(const ElasticDnn<T>& d, int k, const Mat<T>& u, const Mat<T>& target, double gamma,
                      Gradients<T>& grads) {
  if (target.rows() != d.out_len(k) || target.cols() != u.cols())
    throw Error(ErrorCode::LengthMismatch, "target shape does not match network " + std::to_string(k));
  ForwardCache<T> cache;
  const auto y = forward(d, k, u, &cache);
  const auto w = loss_weights<T>(d.slots, k, gamma);
  const T inv_batch = T(1) / static_cast<T>(u.cols());
  const Mat<T> diff = y - target;
  const double loss =
      static_cast<double>((diff.array().square().colwise() * w.array()).sum()) * static_cast<double>(inv_batch);

  // sigmoid'(z) = y (1 - y)
  Mat<T> dz_out = ((T(2) * inv_batch) * diff.array() * y.array() * (T(1) - y.array())).matrix();
  dz_out = (dz_out.array().colwise() * w.array()).matrix();

  grads.ids = d.active_ids(k);
  grads.values.assign(grads.ids.size(), Mat<T>());
  auto slot = [&](int id) -> Mat<T>& {
    for (std::size_t i = 0; i < grads.ids.size(); ++i)
      if (grads.ids[i] == id) return grads.values[i];
    throw Error(ErrorCode::ShapeMismatch, "block " + std::to_string(id) + " is not active");
  };

  const Mat<T>& top = cache.layers.back();
  Mat<T> da = Mat<T>::Zero(top.rows(), top.cols());
  for (int j = 0, off = 0; j <= k; off += d.slots.output_block(j), ++j) {
    const auto dz = dz_out.middleRows(off, d.slots.output_block(j));
    slot(d.output_weight_id(j)).noalias() = dz * top.transpose();
    slot(d.output_bias_id(j)) = dz.rowwise().sum();
    da.noalias() += d.blocks[d.output_weight_id(j)].transpose() * dz;
  }
  for (int i = d.trunk_layers() - 1; i >= 0; --i) {
    const Mat<T> dz = (da.array() * (cache.layers[i + 1].array() > T(0)).template cast<T>()).matrix();
    slot(d.trunk_weight_id(i)).noalias() = dz * cache.layers[i].transpose();
    slot(d.trunk_bias_id(i)) = dz.rowwise().sum();
    da.noalias() = d.blocks[d.trunk_weight_id(i)].transpose() * dz;
  }
  const Mat<T> dz1 = (da.array() * (cache.layers[0].array() > T(0)).template cast<T>()).matrix();
  slot(d.bias1_id()) = dz1.rowwise().sum();
  for (int j = 0, off = 0; j <= k; off += d.slots.input_block(j), ++j)
    slot(d.input_id(j)).noalias() = dz1 * u.middleRows(off, d.slots.input_block(j)).transpose();
  return loss;
}

/// Adam moments per block. Each block counts its own updates, so blocks
/// of networks visited less often still get the right bias correction.
template <class T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Mat<T>> m;
  std::vector<Mat<T>> v;
  std::vector<std::int64_t> steps;

  static AdamState zeros_like(const ElasticDnn<T>& d) {
    AdamState s;
    for (const auto& b : d.blocks) {
      s.m.push_back(Mat<T>::Zero(b.rows(), b.cols()));
      s.v.push_back(Mat<T>::Zero(b.rows(), b.cols()));
      s.steps.push_back(0);
    }
    return s;
  }
};

template <class T>
void adam_step(ElasticDnn<T>& d, const Gradients<T>& g, AdamState<T>& s, double lr) {
  if (s.m.size() != d.blocks.size()) s = AdamState<T>::zeros_like(d);
  if (g.ids.size() != g.values.size()) throw Error(ErrorCode::ShapeMismatch, "gradient ids/values differ");
  for (std::size_t i = 0; i < g.ids.size(); ++i) {
    const int id = g.ids[i];
    if (id < 0 || id >= static_cast<int>(d.blocks.size()) || g.values[i].rows() != d.blocks[id].rows() ||
        g.values[i].cols() != d.blocks[id].cols())
      throw Error(ErrorCode::ShapeMismatch, "gradient for block " + std::to_string(id) + " has the wrong shape");
  }
  const T b1 = static_cast<T>(s.beta1), b2 = static_cast<T>(s.beta2), eps = static_cast<T>(s.eps);
  for (std::size_t i = 0; i < g.ids.size(); ++i) {
    const int id = g.ids[i];
    const auto& grad = g.values[i];
    s.m[id] = b1 * s.m[id] + (T(1) - b1) * grad;
    s.v[id] = b2 * s.v[id] + (T(1) - b2) * grad.cwiseProduct(grad);
    const auto t = static_cast<double>(++s.steps[id]);
    const T c1 = static_cast<T>(1.0 - std::pow(s.beta1, t));
    const T c2 = static_cast<T>(1.0 - std::pow(s.beta2, t));
    const T step = static_cast<T>(lr);
    d.blocks[id].array() -= step * (s.m[id].array() / c1) / ((s.v[id].array() / c2).sqrt() + eps);
  }
}

enum class Interleave { round_robin, sequential };

struct TrainConfig {
  double alpha = 1e-3;
  int batch_size = 100;
  int epochs = 500;
  double gamma = 1.0;
  int lr_halving_period = 50;
  std::uint64_t seed = 0;
  Interleave schedule = Interleave::round_robin;

  void validate() const {
    if (!(alpha > 0.0) || batch_size < 1 || !(gamma >= 0.0) || epochs < 0 || lr_halving_period < 1)
      throw Error(ErrorCode::InvalidConfig,
                  "train config needs alpha > 0, batch_size >= 1, gamma >= 0, lr_halving_period >= 1");
  }
};

/// Scaled, packed samples of one network, one per column.
template <class T>
struct TrainSplit {
  Mat<T> train_inputs;
  Mat<T> train_targets;
  Mat<T> test_inputs;
  Mat<T> test_targets;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  std::vector<double> train_loss;  // mean batch loss seen during the epoch
  std::vector<double> test_loss;   // full test-set loss after the epoch (NaN if empty)
};

template <class T>
struct TrainState {
  AdamState<T> adam;
  int epochs_done = 0;
  std::vector<EpochRecord> history;
};

template <class T>
double dataset_loss(const ElasticDnn<T>& d, int k, const Mat<T>& u, const Mat<T>& target, double gamma,
                    int batch_size) {
  if (u.cols() == 0) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (Eigen::Index b = 0; b < u.cols(); b += batch_size) {
    const auto n = std::min<Eigen::Index>(batch_size, u.cols() - b);
    total += batch_loss<T>(d, k, u.middleCols(b, n), target.middleCols(b, n), gamma) * static_cast<double>(n);
  }
  return total / static_cast<double>(u.cols());
}

/// Runs `cfg.epochs` more epochs, continuing from `state`. Network k's data
/// is `data[k]`; networks beyond data.size() are not touched. Each epoch
/// draws a fresh permutation per network, cuts it into ceil(n/batch)
/// batches and applies them network by network (round-robin per batch or
/// sequentially per network). The learning rate halves every
/// `lr_halving_period` epochs, counted from the first epoch ever run.
template <class T>
void train_incremental(ElasticDnn<T>& d, const std::vector<TrainSplit<T>>& data, const TrainConfig& cfg,
                       TrainState<T>& state) {
  cfg.validate();
  const int K = static_cast<int>(data.size());
  if (K == 0 || K > d.networks()) throw Error(ErrorCode::EmptyTrainSet, "no training data for the model");
  for (int k = 0; k < K; ++k) {
    if (data[k].train_inputs.cols() == 0)
      throw Error(ErrorCode::EmptyTrainSet, "network " + std::to_string(k) + " has no training samples");
    if (data[k].train_inputs.rows() != d.in_len(k) || data[k].train_targets.rows() != d.out_len(k) ||
        data[k].train_targets.cols() != data[k].train_inputs.cols())
      throw Error(ErrorCode::LengthMismatch, "training data of network " + std::to_string(k) +
                                                 " does not match the slot map");
  }
  if (state.adam.m.size() != d.blocks.size()) state.adam = AdamState<T>::zeros_like(d);

  Gradients<T> grads;
  for (int e = 0; e < cfg.epochs; ++e) {
    const int epoch = state.epochs_done;
    const double lr = cfg.alpha * std::pow(0.5, epoch / cfg.lr_halving_period);
    std::vector<std::vector<Eigen::Index>> order(K);
    std::vector<int> batches(K);
    for (int k = 0; k < K; ++k) {
      const auto n = data[k].train_inputs.cols();
      auto& p = order[k];
      p.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) p[i] = i;
      std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) * 1024 + k));
      for (Eigen::Index i = n; i > 1; --i) {
        const auto j = static_cast<Eigen::Index>(unit_draw(rng()) * static_cast<double>(i));
        std::swap(p[i - 1], p[j]);
      }
      batches[k] = static_cast<int>((n + cfg.batch_size - 1) / cfg.batch_size);
    }
    std::vector<double> loss_sum(K, 0.0);
    auto run_batch = [&](int k, int b) {
      const auto n = data[k].train_inputs.cols();
      const auto begin = static_cast<Eigen::Index>(b) * cfg.batch_size;
      const auto size = std::min<Eigen::Index>(cfg.batch_size, n - begin);
      Mat<T> u(d.in_len(k), size), t(d.out_len(k), size);
      for (Eigen::Index i = 0; i < size; ++i) {
        u.col(i) = data[k].train_inputs.col(order[k][begin + i]);
        t.col(i) = data[k].train_targets.col(order[k][begin + i]);
      }
      loss_sum[k] += loss_and_grads(d, k, u, t, cfg.gamma, grads) * static_cast<double>(size);
      adam_step(d, grads, state.adam, lr);
    };
    if (cfg.schedule == Interleave::round_robin) {
      const int rounds = *std::max_element(batches.begin(), batches.end());
      for (int b = 0; b < rounds; ++b)
        for (int k = 0; k < K; ++k)
          if (b < batches[k]) run_batch(k, b);
    } else {
      for (int k = 0; k < K; ++k)
        for (int b = 0; b < batches[k]; ++b) run_batch(k, b);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    for (int k = 0; k < K; ++k) {
      rec.train_loss.push_back(loss_sum[k] / static_cast<double>(data[k].train_inputs.cols()));
      rec.test_loss.push_back(
          dataset_loss(d, k, data[k].test_inputs, data[k].test_targets, cfg.gamma, std::max(cfg.batch_size, 256)));
    }
    state.history.push_back(std::move(rec));
    ++state.epochs_done;
  }
}

template <class T>
std::int64_t param_count(const ElasticDnn<T>& d) {
  std::int64_t n = 0;
  for (const auto& b : d.blocks) n += b.size();
  return n;
}

/// Parameters of K standalone MLPs, one per network, with the same trunk.
inline std::int64_t param_count_separate(const SlotMaps& slots, const std::vector<int>& hidden) {
  std::int64_t trunk = 0;
  for (std::size_t i = 0; i + 1 < hidden.size(); ++i)
    trunk += static_cast<std::int64_t>(hidden[i + 1]) * hidden[i] + hidden[i + 1];
  std::int64_t n = 0;
  for (int k = 0; k < slots.size(); ++k)
    n += static_cast<std::int64_t>(slots.inputs[k]) * hidden.front() + hidden.front() + trunk +
         static_cast<std::int64_t>(slots.outputs[k]) * hidden.back() + slots.outputs[k];
  return n;
}

}  // namespace uopf
