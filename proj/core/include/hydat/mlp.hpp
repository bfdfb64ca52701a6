#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace hydat {

enum class Activation { relu, logistic, identity };
enum class Loss { binary_cross_entropy, mean_squared_error };

/// Fully connected network. Hidden layers use the rectifier; the output layer
/// uses `output_activation`. Parameters live in one flat vector, layer by
/// layer: weights (out x in, row-major) followed by biases (out).
class Mlp {
 public:
  Mlp() = default;
  /// He-uniform weights drawn from Rng(seed), zero biases.
  Mlp(std::vector<std::size_t> layer_sizes, Activation output_activation, std::uint64_t seed);

  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return sizes_.size(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  Activation output_activation() const { return output_activation_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  /// Logistic outputs are kept inside [1e-12, 1 - 1e-12].
  std::vector<double> forward(std::span<const double> input) const;

  /// Loss of one sample. BCE is evaluated from the logit for stability and
  /// expects a single logistic output; MSE is the mean over outputs.
  double loss(std::span<const double> input, std::span<const double> target, Loss kind) const;

  /// Adds d(loss)/d(parameters) of one sample into `grad` (same layout as
  /// parameters()) and returns the sample loss.
  double accumulate_gradient(std::span<const double> input, std::span<const double> target, Loss kind,
                             std::span<double> grad) const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

  bool operator==(const Mlp&) const = default;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }
  void compute_offsets();
  /// Pre-activations and activations per layer; activations[0] is the input.
  void run(std::span<const double> input, std::vector<std::vector<double>>& pre,
           std::vector<std::vector<double>>& act) const;

  std::vector<std::size_t> sizes_;
  Activation output_activation_ = Activation::identity;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
};

/// Input and output standardization fitted on a training split.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const std::vector<std::vector<double>>& rows);
  std::vector<double> apply(std::span<const double> row) const;
  std::vector<double> invert(std::span<const double> row) const;

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
  bool operator==(const Standardizer&) const = default;
};

struct SgdConfig {
  std::uint64_t seed = 42;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 32;
};

using EpochCallback = std::function<void(std::size_t epoch, std::size_t epochs, double mean_loss)>;

/// Mini-batch gradient descent with momentum. Batches follow a Fisher-Yates
/// shuffle drawn from Rng(seed + 1) each epoch, so a run is bit-reproducible.
/// Returns the mean loss of the final epoch.
double train_sgd(Mlp& net, const std::vector<std::vector<double>>& inputs,
                 const std::vector<std::vector<double>>& targets, Loss kind, const SgdConfig& config,
                 const EpochCallback& on_epoch = {});

/// Largest relative gap |analytic - numeric| / max(|analytic| + |numeric|, 1e-6)
/// between backpropagated and central-difference gradients (step 1e-5).
double grad_check(const Mlp& net, std::span<const double> input, std::span<const double> target, Loss kind,
                  double step = 1e-5);

}  // namespace hydat
