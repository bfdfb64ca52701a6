#include "hydat/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hydat/error.hpp"
#include "hydat/random.hpp"

namespace hydat {

namespace {

constexpr double kProbabilityFloor = 1e-12;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::logistic: return "logistic";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation activation_from(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "logistic") return Activation::logistic;
  if (s == "identity") return Activation::identity;
  throw IncompatibleError("unknown activation '" + s + "'");
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation output_activation, std::uint64_t seed)
    : sizes_(std::move(layer_sizes)), output_activation_(output_activation) {
  if (sizes_.size() < 2) throw ValidationError("network needs at least an input and an output layer");
  for (auto s : sizes_) {
    if (s == 0) throw ValidationError("layer width must be positive");
  }
  compute_offsets();
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes_[l]));
    const std::size_t n = sizes_[l] * sizes_[l + 1];
    for (std::size_t i = 0; i < n; ++i) params_[weight_offset(l) + i] = rng.uniform(-limit, limit);
  }
}

void Mlp::compute_offsets() {
  offsets_.clear();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

void Mlp::run(std::span<const double> input, std::vector<std::vector<double>>& pre,
              std::vector<std::vector<double>>& act) const {
  if (input.size() != input_size()) throw ValidationError("network input has the wrong width");
  const std::size_t layers = sizes_.size() - 1;
  pre.resize(layers);
  act.resize(layers + 1);
  act[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    pre[l].resize(out);
    act[l + 1].resize(out);
    const bool last = l + 1 == layers;
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) z += row[i] * act[l][i];
      pre[l][o] = z;
      if (!last) {
        act[l + 1][o] = z > 0.0 ? z : 0.0;
      } else if (output_activation_ == Activation::logistic) {
        act[l + 1][o] = sigmoid(z);
      } else if (output_activation_ == Activation::relu) {
        act[l + 1][o] = z > 0.0 ? z : 0.0;
      } else {
        act[l + 1][o] = z;
      }
    }
  }
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  std::vector<std::vector<double>> pre, act;
  run(input, pre, act);
  auto out = act.back();
  if (output_activation_ == Activation::logistic) {
    for (auto& p : out) p = std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
  }
  return out;
}

double Mlp::loss(std::span<const double> input, std::span<const double> target, Loss kind) const {
  std::vector<std::vector<double>> pre, act;
  run(input, pre, act);
  if (target.size() != output_size()) throw ValidationError("target has the wrong width");
  double total = 0.0;
  for (std::size_t o = 0; o < target.size(); ++o) {
    if (kind == Loss::binary_cross_entropy) {
      const double z = pre.back()[o];
      total += std::max(z, 0.0) - z * target[o] + std::log1p(std::exp(-std::abs(z)));
    } else {
      const double d = act.back()[o] - target[o];
      total += d * d;
    }
  }
  return kind == Loss::mean_squared_error ? total / static_cast<double>(target.size()) : total;
}

double Mlp::accumulate_gradient(std::span<const double> input, std::span<const double> target, Loss kind,
                                std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ValidationError("gradient buffer has the wrong size");
  if (target.size() != output_size()) throw ValidationError("target has the wrong width");
  if (kind == Loss::binary_cross_entropy && output_activation_ != Activation::logistic) {
    throw ValidationError("cross-entropy loss needs a logistic output");
  }
  std::vector<std::vector<double>> pre, act;
  run(input, pre, act);
  const std::size_t layers = sizes_.size() - 1;
  const double m = static_cast<double>(target.size());

  // delta = d(loss)/d(pre-activation) of the current layer
  std::vector<double> delta(output_size());
  double sample_loss = 0.0;
  for (std::size_t o = 0; o < delta.size(); ++o) {
    if (kind == Loss::binary_cross_entropy) {
      const double z = pre.back()[o];
      sample_loss += std::max(z, 0.0) - z * target[o] + std::log1p(std::exp(-std::abs(z)));
      delta[o] = sigmoid(z) - target[o];
    } else {
      const double d = act.back()[o] - target[o];
      sample_loss += d * d / m;
      double dact = 2.0 * d / m;
      if (output_activation_ == Activation::logistic) {
        const double s = act.back()[o];
        dact *= s * (1.0 - s);
      } else if (output_activation_ == Activation::relu) {
        dact *= pre.back()[o] > 0.0 ? 1.0 : 0.0;
      }
      delta[o] = dact;
    }
  }

  std::vector<double> prev;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    double* gw = grad.data() + weight_offset(l);
    double* gb = grad.data() + bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) {
      gb[o] += delta[o];
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += delta[o] * act[l][i];
    }
    if (l == 0) break;
    prev.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
    }
    for (std::size_t i = 0; i < in; ++i) {
      if (pre[l - 1][i] <= 0.0) prev[i] = 0.0;
    }
    delta.swap(prev);
  }
  return sample_loss;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto w0 = params_.begin() + static_cast<std::ptrdiff_t>(weight_offset(l));
    const auto b0 = params_.begin() + static_cast<std::ptrdiff_t>(bias_offset(l));
    layers.push_back({
        {"inputs", sizes_[l]},
        {"outputs", sizes_[l + 1]},
        {"activation", l + 2 == sizes_.size() ? activation_name(output_activation_) : "relu"},
        {"weights", std::vector<double>(w0, w0 + static_cast<std::ptrdiff_t>(sizes_[l] * sizes_[l + 1]))},
        {"biases", std::vector<double>(b0, b0 + static_cast<std::ptrdiff_t>(sizes_[l + 1]))},
    });
  }
  return {{"layer_sizes", sizes_}, {"layers", layers}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp net;
  net.sizes_ = j.at("layer_sizes").get<std::vector<std::size_t>>();
  if (net.sizes_.size() < 2) throw IncompatibleError("network needs at least two layers");
  net.compute_offsets();
  const auto& layers = j.at("layers");
  if (layers.size() + 1 != net.sizes_.size()) throw IncompatibleError("layer list does not match layer_sizes");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto w = layers[l].at("weights").get<std::vector<double>>();
    const auto b = layers[l].at("biases").get<std::vector<double>>();
    if (w.size() != net.sizes_[l] * net.sizes_[l + 1] || b.size() != net.sizes_[l + 1]) {
      throw IncompatibleError("layer " + std::to_string(l) + " has the wrong parameter count");
    }
    std::copy(w.begin(), w.end(), net.params_.begin() + static_cast<std::ptrdiff_t>(net.weight_offset(l)));
    std::copy(b.begin(), b.end(), net.params_.begin() + static_cast<std::ptrdiff_t>(net.bias_offset(l)));
  }
  net.output_activation_ = activation_from(layers.back().at("activation").get<std::string>());
  return net;
}

Standardizer Standardizer::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InsufficientDataError("cannot standardize an empty sample");
  const std::size_t d = rows.front().size();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) s.mean[i] += r[i];
  }
  for (auto& m : s.mean) m /= n;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) s.stddev[i] += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
  }
  for (std::size_t i = 0; i < d; ++i) {
    s.stddev[i] = std::sqrt(s.stddev[i] / n);
    if (!(s.stddev[i] > 1e-12 * std::max(1.0, std::abs(s.mean[i])))) s.stddev[i] = 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = (row[i] - mean[i]) / stddev[i];
  return out;
}

std::vector<double> Standardizer::invert(std::span<const double> row) const {
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] * stddev[i] + mean[i];
  return out;
}

nlohmann::json Standardizer::to_json() const { return {{"mean", mean}, {"std", stddev}}; }

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("std").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size()) throw IncompatibleError("standardizer mean/std differ in length");
  return s;
}

double train_sgd(Mlp& net, const std::vector<std::vector<double>>& inputs,
                 const std::vector<std::vector<double>>& targets, Loss kind, const SgdConfig& config,
                 const EpochCallback& on_epoch) {
  if (inputs.size() != targets.size()) throw ValidationError("inputs and targets differ in length");
  if (inputs.empty()) throw InsufficientDataError("no training rows");
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  auto params = net.parameters();
  std::vector<double> grad(params.size()), velocity(params.size(), 0.0);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed + 1);
  double epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        epoch_loss += net.accumulate_gradient(inputs[order[k]], targets[order[k]], kind, grad);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity[p] = config.momentum * velocity[p] - config.learning_rate * grad[p] * scale;
        params[p] += velocity[p];
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    if (on_epoch) on_epoch(epoch + 1, config.epochs, epoch_loss);
  }
  return epoch_loss;
}

double grad_check(const Mlp& net, std::span<const double> input, std::span<const double> target, Loss kind,
                  double step) {
  std::vector<double> analytic(net.parameters().size(), 0.0);
  net.accumulate_gradient(input, target, kind, analytic);
  Mlp probe = net;
  auto params = probe.parameters();
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double saved = params[p];
    params[p] = saved + step;
    const double up = probe.loss(input, target, kind);
    params[p] = saved - step;
    const double down = probe.loss(input, target, kind);
    params[p] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max(std::abs(analytic[p]) + std::abs(numeric), 1e-6);
    worst = std::max(worst, std::abs(analytic[p] - numeric) / denom);
  }
  return worst;
}

}  // namespace hydat
