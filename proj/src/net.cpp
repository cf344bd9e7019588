#include "ega/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ega/error.hpp"
#include "ega/simd.hpp"

namespace ega::net {

using linalg::Matrix;

Mlp::Mlp(std::size_t input_dim, std::vector<LayerSpec> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
  if (input_dim_ == 0) throw InvalidConfig("mlp: input dimension must be positive");
  std::size_t total = 0;
  std::size_t fan = input_dim_;
  for (const auto& l : layers_) {
    if (l.width == 0) throw InvalidConfig("mlp: layer width must be positive");
    offsets_.push_back(total);
    total += l.width * fan + l.width;
    fan = l.width;
  }
  params_.assign(total, 0.0);
}

std::size_t Mlp::output_dim() const noexcept {
  return layers_.empty() ? input_dim_ : layers_.back().width;
}

void Mlp::unflatten(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw InvalidInput("mlp: expected " + std::to_string(params_.size()) + " parameters, got " +
                       std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

void Mlp::init_glorot(std::mt19937_64& rng) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::size_t fan = fan_in(l);
    const std::size_t width = layers_[l].width;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan + width));
    std::uniform_real_distribution<double> u(-limit, limit);
    double* w = params_.data() + weight_offset(l);
    for (std::size_t i = 0; i < width * fan; ++i) w[i] = u(rng);
    std::fill(w + width * fan, w + width * fan + width, 0.0);
  }
}

MlpCache Mlp::forward(const Matrix& x) const {
  if (x.cols() != input_dim_) {
    throw InvalidInput("mlp: input has " + std::to_string(x.cols()) + " columns, expected " +
                       std::to_string(input_dim_));
  }
  MlpCache cache{x, {}};
  cache.outputs.reserve(layers_.size());
  const Matrix* prev = &cache.input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::size_t fan = fan_in(l);
    const std::size_t width = layers_[l].width;
    const double* w = params_.data() + weight_offset(l);
    const double* bias = w + width * fan;
    Matrix out(x.rows(), width);
    for (std::size_t b = 0; b < x.rows(); ++b) {
      auto in = prev->row(b);
      auto o = out.row(b);
      for (std::size_t j = 0; j < width; ++j) {
        double z = simd::dot({w + j * fan, fan}, in) + bias[j];
        o[j] = layers_[l].activation == Activation::Tanh ? std::tanh(z) : z;
      }
    }
    cache.outputs.push_back(std::move(out));
    prev = &cache.outputs.back();
  }
  return cache;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& d_out, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw InvalidInput("mlp: gradient buffer size mismatch");
  if (layers_.empty()) return d_out;
  Matrix delta = d_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const std::size_t fan = fan_in(l);
    const std::size_t width = layers_[l].width;
    const Matrix& out = cache.outputs[l];
    const Matrix& in = l == 0 ? cache.input : cache.outputs[l - 1];
    if (layers_[l].activation == Activation::Tanh) {
      auto d = delta.data();
      auto a = out.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - a[i] * a[i];
    }
    const double* w = params_.data() + weight_offset(l);
    double* gw = grad.data() + weight_offset(l);
    double* gb = gw + width * fan;
    Matrix d_in(in.rows(), fan);
    for (std::size_t b = 0; b < in.rows(); ++b) {
      auto x = in.row(b);
      auto dx = d_in.row(b);
      auto dz = delta.row(b);
      for (std::size_t j = 0; j < width; ++j) {
        const double g = dz[j];
        if (g == 0.0) continue;
        simd::axpy(g, x, {gw + j * fan, fan});
        gb[j] += g;
        simd::axpy(g, {w + j * fan, fan}, dx);
      }
    }
    delta = std::move(d_in);
  }
  return delta;
}

std::size_t ModelConfig::head_output(HeadKind kind) const noexcept {
  switch (kind) {
    case HeadKind::Waveform: return waveform_dim;
    case HeadKind::Anchor: return anchor_classes;
    case HeadKind::Length: return length_classes;
  }
  return 0;
}

namespace {

constexpr std::array<HeadKind, kTaskCount> kHeadKinds{HeadKind::Waveform, HeadKind::Anchor,
                                                     HeadKind::Length};

Mlp make_head(const ModelConfig& c, std::size_t trunk_out, HeadKind kind) {
  std::vector<LayerSpec> layers;
  if (c.head_hidden > 0) layers.push_back({c.head_hidden, Activation::Tanh});
  layers.push_back({c.head_output(kind), Activation::Identity});
  return Mlp(trunk_out, std::move(layers));
}

}  // namespace

Model Model::create(const ModelConfig& config, std::uint64_t seed) {
  if (config.trunk_widths.empty()) throw InvalidConfig("model: trunk needs at least one layer");
  if (config.waveform_dim == 0 || config.anchor_classes == 0 || config.length_classes == 0)
    throw InvalidConfig("model: head output sizes must be positive");
  std::vector<LayerSpec> trunk_layers;
  for (std::size_t w : config.trunk_widths) trunk_layers.push_back({w, config.trunk_activation});
  Model m{config, Mlp(config.input_dim, std::move(trunk_layers)), {}};
  for (std::size_t i = 0; i < kTaskCount; ++i)
    m.heads[i] = make_head(config, m.trunk.output_dim(), kHeadKinds[i]);
  std::mt19937_64 rng(seed);
  m.trunk.init_glorot(rng);
  for (auto& h : m.heads) h.init_glorot(rng);
  return m;
}

void validate(const Model& model, const Batch& batch) {
  const auto& c = model.config;
  const std::size_t b = batch.size();
  if (b == 0) throw InvalidInput("batch is empty");
  if (batch.inputs.cols() != c.input_dim) throw InvalidInput("batch input width does not match model");
  if (batch.waveform.rows() != b || batch.waveform.cols() != c.waveform_dim)
    throw InvalidInput("batch waveform targets do not match model");
  if (batch.anchors.size() != b || batch.length_class.size() != b)
    throw InvalidInput("batch label counts do not match batch size");
  for (const auto& a : batch.anchors)
    for (std::size_t idx : a)
      if (idx >= c.anchor_classes) throw InvalidInput("anchor label out of range");
  for (std::size_t k : batch.length_class)
    if (k >= c.length_classes) throw InvalidInput("length label out of range");
}

ForwardPass forward(const Model& model, const Matrix& inputs) {
  ForwardPass pass;
  pass.trunk = model.trunk.forward(inputs);
  for (std::size_t i = 0; i < kTaskCount; ++i)
    pass.heads[i] = model.heads[i].forward(pass.trunk.outputs.back());
  return pass;
}

namespace {

// Stable softmax of one logit row.
void softmax(std::span<const double> logits, std::span<double> out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += out[i] = std::exp(logits[i] - top);
  for (double& v : out) v /= total;
}

double log_sum_exp(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - top);
  return top + std::log(total);
}

double sample_rmse(std::span<const double> p, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(p.size()));
}

// Loss values and dLoss/dprediction for every head.
TaskLosses losses_and_output_grads(const ForwardPass& pass, const Batch& batch,
                                   std::array<Matrix, kTaskCount>* d_out) {
  const std::size_t b = batch.size();
  const double inv_b = 1.0 / static_cast<double>(b);
  TaskLosses out;

  const Matrix& wave = pass.prediction(0);
  const Matrix& anchor = pass.prediction(1);
  const Matrix& length = pass.prediction(2);
  if (d_out) {
    (*d_out)[0] = Matrix(b, wave.cols());
    (*d_out)[1] = Matrix(b, anchor.cols());
    (*d_out)[2] = Matrix(b, length.cols());
  }
  std::vector<double> prob(std::max(anchor.cols(), length.cols()));

  for (std::size_t s = 0; s < b; ++s) {
    // waveform
    const double r = sample_rmse(wave.row(s), batch.waveform.row(s));
    out.values[0] += r * inv_b;
    if (d_out) {
      const double k = inv_b / (static_cast<double>(wave.cols()) * std::max(r, kRmseFloor));
      auto d = (*d_out)[0].row(s);
      auto p = wave.row(s);
      auto y = batch.waveform.row(s);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = k * (p[i] - y[i]);
    }

    // anchors
    const auto& labels = batch.anchors[s];
    if (labels.empty()) {
      ++out.empty_anchor_samples;
    } else {
      auto z = anchor.row(s);
      const double lse = log_sum_exp(z);
      const double inv_a = 1.0 / static_cast<double>(labels.size());
      double ce = 0.0;
      for (std::size_t a : labels) ce += lse - z[a];
      out.values[1] += ce * inv_a * inv_b;
      if (d_out) {
        std::span<double> p(prob.data(), z.size());
        softmax(z, p);
        auto d = (*d_out)[1].row(s);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = p[i] * inv_b;
        for (std::size_t a : labels) d[a] -= inv_a * inv_b;
      }
    }

    // length
    auto z = length.row(s);
    const std::size_t label = batch.length_class[s];
    out.values[2] += (log_sum_exp(z) - z[label]) * inv_b;
    if (d_out) {
      std::span<double> p(prob.data(), z.size());
      softmax(z, p);
      auto d = (*d_out)[2].row(s);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = p[i] * inv_b;
      d[label] -= inv_b;
    }
  }
  return out;
}

}  // namespace

double cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw InvalidInput("cross_entropy: label out of range");
  return log_sum_exp(logits) - logits[label];
}

TaskLosses task_losses(const ForwardPass& pass, const Batch& batch) {
  if (pass.prediction(0).rows() != batch.size() || pass.prediction(0).cols() != batch.waveform.cols())
    throw InvalidInput("task_losses: prediction and target shapes differ");
  return losses_and_output_grads(pass, batch, nullptr);
}

Gradients per_task_gradients(const Model& model, const Batch& batch, const ForwardPass& pass) {
  validate(model, batch);
  std::array<Matrix, kTaskCount> d_out;
  TaskLosses losses = losses_and_output_grads(pass, batch, &d_out);

  const std::size_t m = model.trunk.param_count();
  Matrix trunk_rows(kTaskCount, m);
  std::array<std::vector<double>, kTaskCount> head_grads;
  for (std::size_t i = 0; i < kTaskCount; ++i) {
    head_grads[i].assign(model.heads[i].param_count(), 0.0);
    Matrix d_feat = model.heads[i].backward(pass.heads[i], d_out[i], head_grads[i]);
    model.trunk.backward(pass.trunk, d_feat, trunk_rows.row(i));
  }
  return Gradients{losses, balance::GradientMatrix(std::move(trunk_rows)), std::move(head_grads)};
}

Gradients per_task_gradients(const Model& model, const Batch& batch) {
  validate(model, batch);
  return per_task_gradients(model, batch, forward(model, batch.inputs));
}

SgdMomentum::SgdMomentum(double eta, double momentum, double weight_decay)
    : eta_(eta), momentum_(momentum), weight_decay_(weight_decay) {
  if (!(eta > 0.0)) throw InvalidConfig("sgd: eta must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidConfig("sgd: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw InvalidConfig("sgd: weight decay must be >= 0");
}

void SgdMomentum::step(std::span<double> weights, std::span<const double> grad) {
  if (weights.size() != grad.size()) throw InvalidInput("sgd: weight and gradient sizes differ");
  if (velocity_.empty()) velocity_.assign(weights.size(), 0.0);
  if (velocity_.size() != weights.size()) throw InvalidInput("sgd: parameter count changed");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + (grad[i] + weight_decay_ * weights[i]);
    weights[i] -= eta_ * velocity_[i];
  }
}

HeadOptimizer::HeadOptimizer(double eta, double momentum, double weight_decay)
    : opt_{SgdMomentum(eta, momentum, weight_decay), SgdMomentum(eta, momentum, weight_decay),
           SgdMomentum(eta, momentum, weight_decay)} {}

void HeadOptimizer::step(Model& model, const std::array<std::vector<double>, kTaskCount>& grads) {
  for (std::size_t i = 0; i < kTaskCount; ++i) opt_[i].step(model.heads[i].params(), grads[i]);
}

}  // namespace ega::net
