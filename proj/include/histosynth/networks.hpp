#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "histosynth/data_model.hpp"
#include "histosynth/rng.hpp"

namespace histosynth::net {

/// Batch statistics while training, running statistics at inference. Passed explicitly
/// so a frozen model can be shared by concurrent callers.
enum class Mode { kTrain, kInfer };

inline constexpr double kLeakySlope = 0.2;

// ---------------------------------------------------------------------------
// Spectral normalization
// ---------------------------------------------------------------------------

struct SpectralNormState {
  torch::Tensor u;  // unit left singular vector estimate, length = out features
  std::int64_t iterations = 0;
  bool degenerate = false;  // set when the weight is zero and was returned unchanged
};

SpectralNormState make_spectral_state(std::int64_t rows, Rng& rng, torch::Dtype dtype = torch::kFloat);

/// Power iteration on the (rows, -1) view of w; returns w / sigma with sigma = u^T W v.
torch::Tensor spectral_normalize(const torch::Tensor& w, SpectralNormState& s, int n_iter = 1);

/// Largest singular value by full SVD (test and diagnostics use).
double top_singular_value(const torch::Tensor& w);

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

struct ConvSpec {
  std::int64_t in = 1;
  std::int64_t out = 1;
  std::int64_t kernel = 3;
  std::int64_t stride = 1;
  bool bias = true;
  bool spectral = true;
};

/// Convolution with "same"-style padding (kernel / 2), Glorot-initialized weights, zero bias,
/// and an optional spectral normalization of its weight. The power-iteration vectors are
/// buffers, so they checkpoint with the module; forward() only reads them.
class SNConv2dImpl : public torch::nn::Module {
 public:
  SNConv2dImpl(ConvSpec spec, Rng& rng);

  torch::Tensor forward(const torch::Tensor& x) const;
  /// Advances the power iteration n steps (no autograd).
  void power_iterate(int n = 1);
  /// W / sigma(W) with u, v held constant; plain W without spectral normalization.
  torch::Tensor effective_weight() const;

  const ConvSpec& spec() const { return spec_; }

  torch::Tensor weight;
  torch::Tensor bias;
  torch::Tensor sn_u;
  torch::Tensor sn_v;

 private:
  ConvSpec spec_;
};
TORCH_MODULE(SNConv2d);

/// Per-channel normalization over (N, H, W). The affine variant adds learned scale/offset.
/// Running statistics follow running = momentum * running + (1 - momentum) * batch.
class BatchNorm2dImpl : public torch::nn::Module {
 public:
  BatchNorm2dImpl(std::int64_t channels, bool affine, double momentum = 0.9, double eps = 1e-5);

  torch::Tensor forward(const torch::Tensor& x, Mode mode);

  torch::Tensor running_mean;
  torch::Tensor running_var;
  torch::Tensor weight;  // undefined unless affine
  torch::Tensor bias;

 private:
  double momentum_;
  double eps_;
};
TORCH_MODULE(BatchNorm2d);

struct SpadeOptions {
  std::int64_t channels = 0;
  std::int64_t num_classes = 0;
  std::int64_t hidden = 128;
  bool spectral = true;
};

/// Spatially-adaptive normalization: x_hat * (1 + gamma(m)) + beta(m), where gamma and beta are
/// per-pixel maps predicted from the label map by a shared 3x3 embedding (ReLU) followed by
/// two 3x3 heads.
class SpadeNormImpl : public torch::nn::Module {
 public:
  SpadeNormImpl(SpadeOptions opts, Rng& rng);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& onehot, Mode mode);
  /// (gamma, beta) for a one-hot map already resized to the activation size; gamma includes the +1.
  std::pair<torch::Tensor, torch::Tensor> modulation(const torch::Tensor& onehot_resized) const;

  const SpadeOptions& options() const { return opts_; }

  BatchNorm2d norm{nullptr};
  SNConv2d shared{nullptr};
  SNConv2d gamma{nullptr};
  SNConv2d beta{nullptr};

 private:
  SpadeOptions opts_;
};
TORCH_MODULE(SpadeNorm);

/// Nearest-neighbour resize of a one-hot volume to (h, w).
torch::Tensor resize_labels(const torch::Tensor& onehot, std::int64_t h, std::int64_t w);

class SpadeResBlockImpl : public torch::nn::Module {
 public:
  SpadeResBlockImpl(std::int64_t in, std::int64_t out, std::int64_t num_classes, std::int64_t hidden, bool spectral,
                    Rng& rng);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& onehot, Mode mode);
  bool learned_skip() const { return static_cast<bool>(skip_conv); }

  SpadeNorm norm_0{nullptr}, norm_1{nullptr}, norm_skip{nullptr};
  SNConv2d conv_0{nullptr}, conv_1{nullptr}, skip_conv{nullptr};
};
TORCH_MODULE(SpadeResBlock);

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  int latent_dim = kLatentDim;
  int base_channels = 1024;
  int resolution = 512;
  int num_classes = 3;
  int spade_hidden = 128;
  std::vector<int> channel_schedule{1024, 1024, 512, 256, 128, 64, 64};
  bool spectral_norm = true;

  /// log2(resolution / 4): one residual block plus one 2x upsample per stage.
  int stages() const;
  /// Schedule truncated, or extended with its last entry, to stages() entries.
  std::vector<int> stage_channels() const;
  void validate() const;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

class GeneratorImpl : public torch::nn::Module {
 public:
  GeneratorImpl(GeneratorConfig cfg, Rng& rng);

  /// z: (B, latent_dim); onehot: (B, K, R, R). Returns (B, 3, R, R) in [-1, 1].
  /// If trace is given, receives the spatial size entering each stage followed by the output size.
  torch::Tensor forward(const torch::Tensor& z, const torch::Tensor& onehot, Mode mode,
                        std::vector<std::int64_t>* trace = nullptr);

  const GeneratorConfig& config() const { return cfg_; }
  int upsample_count() const { return static_cast<int>(blocks.size()); }

  torch::nn::Linear dense{nullptr};
  std::vector<SpadeResBlock> blocks;
  SNConv2d to_rgb{nullptr};

 private:
  GeneratorConfig cfg_;
};
TORCH_MODULE(Generator);

// ---------------------------------------------------------------------------
// Discriminators
// ---------------------------------------------------------------------------

struct DiscriminatorConfig {
  int num_classes = 3;
  std::vector<int> channels{64, 128, 256, 512};
  int kernel = 3;
  int num_scales = 2;
  bool spectral_norm = true;

  void validate() const;
  nlohmann::json to_json() const;
  static DiscriminatorConfig from_json(const nlohmann::json& j);
};

/// Patch discriminator over concat(one-hot labels, image): stride-2 conv -> instance norm
/// -> LeakyReLU(0.2) per block, then a stride-1 conv to a 1-channel score map.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(const DiscriminatorConfig& cfg, Rng& rng);

  torch::Tensor forward(const torch::Tensor& input);

  std::vector<SNConv2d> convs;
  std::vector<torch::nn::InstanceNorm2d> norms;
  SNConv2d score{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

/// Identically laid out discriminators; scale s sees the input average-pooled s times.
class MultiScaleDiscriminatorImpl : public torch::nn::Module {
 public:
  MultiScaleDiscriminatorImpl(DiscriminatorConfig cfg, Rng& rng);

  std::vector<torch::Tensor> forward(const torch::Tensor& onehot, const torch::Tensor& image);
  const DiscriminatorConfig& config() const { return cfg_; }

  std::vector<PatchDiscriminator> scales;

 private:
  DiscriminatorConfig cfg_;
};
TORCH_MODULE(MultiScaleDiscriminator);

/// 2x2 average pooling; odd spatial dimensions are a shape error.
torch::Tensor downsample2x(const torch::Tensor& x);

/// Every spectrally normalized convolution inside a module tree.
std::vector<SNConv2d> spectral_convs(torch::nn::Module& root);
void power_iterate_all(torch::nn::Module& root, int n = 1);

// ---------------------------------------------------------------------------
// Tensor conversion and inference
// ---------------------------------------------------------------------------

/// (B, K, H, W) float one-hot volume; validates every map against K.
torch::Tensor one_hot(const std::vector<LabelMap>& maps, int num_classes);
/// (B, 3, H, W) from normalized images.
torch::Tensor to_tensor(const std::vector<NormImage>& images);
torch::Tensor to_tensor(const std::vector<ByteImage>& images);
/// (B, latent_dim).
torch::Tensor to_tensor(const std::vector<LatentVector>& latents);
NormImage to_norm_image(const torch::Tensor& chw);

/// Deterministic single-image synthesis in the given mode (inference by default).
NormImage generate(Generator& g, const LabelMap& m, const LatentVector& z, Mode mode = Mode::kInfer);

/// Glorot-uniform fill from rng: U(-b, b), b = sqrt(6 / (fan_in + fan_out)).
void glorot_fill(torch::Tensor& w, std::int64_t fan_in, std::int64_t fan_out, Rng& rng);

}  // namespace histosynth::net
