#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "histosynth/checkpoint.hpp"
#include "histosynth/networks.hpp"
#include "histosynth/objectives.hpp"
#include "histosynth/seg_metrics.hpp"
#include "histosynth/stain_prep.hpp"

namespace histosynth::seg {

struct SegConfig {
  int num_classes = 3;
  int base_features = 64;
  int crop_size = 256;
  int batch_size = 10;
  LrSchedule schedule{1e-4, 0.95, 1000};
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::int64_t iterations = 2000;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SegConfig from_json(const nlohmann::json& j);
};

/// conv3x3 -> BN -> ReLU -> conv3x3 -> BN, plus identity, then ReLU.
/// 16 base features on 64x64 crops; the desk-scale counterpart of the defaults.
SegConfig desk_preset(int num_classes = 3);

class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(std::int64_t channels, Rng& rng);
  torch::Tensor forward(const torch::Tensor& x, net::Mode mode);

  net::SNConv2d conv_0{nullptr}, conv_1{nullptr};
  net::BatchNorm2d bn_0{nullptr}, bn_1{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// conv3x3 -> BN -> ReLU -> residual block. Down blocks pool afterwards; up blocks first
/// upsample bilinearly and concatenate the matching encoder features.
class UnitImpl : public torch::nn::Module {
 public:
  UnitImpl(std::int64_t in, std::int64_t out, Rng& rng);
  torch::Tensor forward(const torch::Tensor& x, net::Mode mode);

  net::SNConv2d conv{nullptr};
  net::BatchNorm2d bn{nullptr};
  ResidualBlock res{nullptr};
};
TORCH_MODULE(Unit);

/// Residual U-Net: three down blocks (f, 2f, 4f), a bridge (8f), three up blocks, and a 1x1 head
/// producing one logit map per class.
class SegNetImpl : public torch::nn::Module {
 public:
  SegNetImpl(const SegConfig& cfg, Rng& rng);

  /// x: (B, 3, H, W) in [-1, 1] with H, W divisible by 8; returns (B, K, H, W) logits.
  torch::Tensor forward(const torch::Tensor& x, net::Mode mode, std::vector<std::int64_t>* trace = nullptr);

  std::vector<Unit> down;
  Unit bridge{nullptr};
  std::vector<Unit> up;
  net::SNConv2d head{nullptr};
};
TORCH_MODULE(SegNet);

/// Per-pixel argmax over (K, H, W) logits; ties go to the lowest class index.
LabelMap argmax_labels(const torch::Tensor& logits);

LabelMap predict(SegNet& model, const ByteImage& img, int num_classes);

class SegTrainer {
 public:
  SegTrainer(SegConfig cfg);
  static SegTrainer from_checkpoint(const Container& c);

  SegTrainer(SegTrainer&&) = default;
  SegTrainer& operator=(SegTrainer&&) = default;

  /// One Adam step on softmax cross-entropy over random crops drawn with replacement.
  double step(const std::vector<stain::PatchPair>& data);

  Container checkpoint() const;

  SegNet& model() { return model_; }
  const SegConfig& config() const { return cfg_; }
  std::int64_t iteration() const { return iteration_; }

 private:
  SegConfig cfg_;
  Rng rng_;
  SegNet model_{nullptr};
  std::unique_ptr<Adam> opt_;
  std::int64_t iteration_ = 0;
};

struct SegTrainResult {
  std::vector<double> losses;
  /// Classes that never occur in the training labels.
  std::vector<int> absent_classes;
};

SegTrainResult train_seg(SegTrainer& trainer, const std::vector<stain::PatchPair>& data, std::int64_t until = -1);

SegNet load_seg_model(const std::filesystem::path& path, SegConfig* cfg_out = nullptr);

metrics::SegMetrics evaluate_model(SegNet& model, const std::vector<stain::PatchPair>& data, int num_classes);

}  // namespace histosynth::seg
