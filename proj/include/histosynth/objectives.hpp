#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "histosynth/rng.hpp"

namespace histosynth {

double glorot_bound(std::int64_t fan_in, std::int64_t fan_out);
/// count draws from U(-b, b), b = sqrt(6 / (fan_in + fan_out)).
std::vector<double> glorot_init(std::int64_t fan_in, std::int64_t fan_out, std::size_t count, Rng& rng);

// Least-squares adversarial losses. Multi-scale variants sum the per-scale terms.
torch::Tensor lsgan_d_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);
torch::Tensor lsgan_g_loss(const torch::Tensor& fake_scores);
torch::Tensor lsgan_d_loss(const std::vector<torch::Tensor>& real_scores, const std::vector<torch::Tensor>& fake_scores);
torch::Tensor lsgan_g_loss(const std::vector<torch::Tensor>& fake_scores);

struct ExtractorConfig {
  /// "random": frozen seed-fixed conv stack (Glorot-uniform init); "vgg19": 16-conv VGG-19 feature layout whose
  /// weights come from a checkpoint-format file (see tools/export_vgg19.py).
  std::string kind = "random";
  std::uint64_t seed = 1234;
  std::vector<int> widths{32, 64, 64};
  std::filesystem::path weights;

  nlohmann::json to_json() const;
  static ExtractorConfig from_json(const nlohmann::json& j);
};

/// Frozen feature network; forward() returns the last convolution's output (pre-activation).
/// Images enter in [-1, 1].
class FeatureExtractorImpl : public torch::nn::Module {
 public:
  explicit FeatureExtractorImpl(ExtractorConfig cfg);

  torch::Tensor forward(const torch::Tensor& image);
  const ExtractorConfig& config() const { return cfg_; }

  std::vector<torch::nn::Conv2d> convs;
  /// Max-pool after conv i (VGG layout) or stride-2 conv (random layout) markers.
  std::vector<bool> pool_after;

 private:
  ExtractorConfig cfg_;
};
TORCH_MODULE(FeatureExtractor);

/// mean |phi(fake) - phi(real)|.
torch::Tensor perceptual_loss(const torch::Tensor& fake, const torch::Tensor& real, FeatureExtractor& phi);

struct LrSchedule {
  double base = 2e-4;
  double decay = 0.95;
  std::int64_t every = 1000;
};

/// base * decay^floor(iteration / every).
double lr_at(std::int64_t iteration, const LrSchedule& s = {});

/// Adam with externally supplied learning rate; moments are plain tensors so they checkpoint.
class Adam {
 public:
  Adam(std::vector<torch::Tensor> params, double beta1, double beta2, double eps = 1e-8);

  void zero_grad();
  void step(double lr);

  std::int64_t steps() const { return step_; }
  void set_steps(std::int64_t s) { step_ = s; }
  std::vector<torch::Tensor>& first_moments() { return m_; }
  std::vector<torch::Tensor>& second_moments() { return v_; }
  const std::vector<torch::Tensor>& params() const { return params_; }

 private:
  std::vector<torch::Tensor> params_;
  std::vector<torch::Tensor> m_;
  std::vector<torch::Tensor> v_;
  double beta1_, beta2_, eps_;
  std::int64_t step_ = 0;
};

}  // namespace histosynth
