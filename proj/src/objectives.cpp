#include "histosynth/objectives.hpp"

#include <cmath>

#include "histosynth/checkpoint.hpp"
#include "histosynth/error.hpp"
#include "histosynth/networks.hpp"

namespace histosynth {

double glorot_bound(std::int64_t fan_in, std::int64_t fan_out) {
  if (fan_in < 1 || fan_out < 1) throw Error(ErrorCode::kInvalidArgument, "fans must be >= 1");
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

std::vector<double> glorot_init(std::int64_t fan_in, std::int64_t fan_out, std::size_t count, Rng& rng) {
  const double b = glorot_bound(fan_in, fan_out);
  std::vector<double> out(count);
  for (auto& w : out) w = rng.uniform(-b, b);
  return out;
}

torch::Tensor lsgan_d_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  return 0.5 * (real_scores - 1.0).pow(2).mean() + 0.5 * fake_scores.pow(2).mean();
}

torch::Tensor lsgan_g_loss(const torch::Tensor& fake_scores) { return 0.5 * (fake_scores - 1.0).pow(2).mean(); }

torch::Tensor lsgan_d_loss(const std::vector<torch::Tensor>& real_scores, const std::vector<torch::Tensor>& fake_scores) {
  if (real_scores.size() != fake_scores.size() || real_scores.empty())
    throw Error(ErrorCode::kShape, "real and fake score lists must be non-empty and aligned");
  auto total = lsgan_d_loss(real_scores[0], fake_scores[0]);
  for (std::size_t s = 1; s < real_scores.size(); ++s) total = total + lsgan_d_loss(real_scores[s], fake_scores[s]);
  return total;
}

torch::Tensor lsgan_g_loss(const std::vector<torch::Tensor>& fake_scores) {
  if (fake_scores.empty()) throw Error(ErrorCode::kShape, "empty score list");
  auto total = lsgan_g_loss(fake_scores[0]);
  for (std::size_t s = 1; s < fake_scores.size(); ++s) total = total + lsgan_g_loss(fake_scores[s]);
  return total;
}

nlohmann::json ExtractorConfig::to_json() const {
  return {{"kind", kind}, {"seed", seed}, {"widths", widths}, {"weights", weights.string()}};
}

ExtractorConfig ExtractorConfig::from_json(const nlohmann::json& j) {
  ExtractorConfig c;
  c.kind = j.value("kind", c.kind);
  c.seed = j.value("seed", c.seed);
  c.widths = j.value("widths", c.widths);
  c.weights = j.value("weights", std::string());
  return c;
}

namespace {

// torchvision's vgg19 "features" layout: channel counts, 0 marks a 2x2 max-pool.
constexpr int kVgg19[] = {64, 64, 0, 128, 128, 0, 256, 256, 256, 256, 0, 512, 512, 512, 512, 0, 512, 512, 512, 512};

}  // namespace

FeatureExtractorImpl::FeatureExtractorImpl(ExtractorConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.kind == "random") {
    if (cfg_.widths.empty()) throw Error(ErrorCode::kConfig, "extractor needs at least one layer");
    Rng rng(cfg_.seed);
    std::int64_t in = 3;
    for (std::size_t i = 0; i < cfg_.widths.size(); ++i) {
      const std::int64_t out = cfg_.widths[i];
      const std::int64_t stride = i == 0 ? 1 : 2;
      auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
      {
        torch::NoGradGuard guard;
        net::glorot_fill(conv->weight, in * 9, out * 9, rng);
        conv->bias.zero_();
      }
      convs.push_back(register_module("conv_" + std::to_string(i), conv));
      pool_after.push_back(false);
      in = out;
    }
  } else if (cfg_.kind == "vgg19") {
    std::int64_t in = 3;
    int index = 0;
    for (int c : kVgg19) {
      if (c == 0) {
        pool_after.back() = true;
        ++index;
        continue;
      }
      // Names match torchvision's features.<index>.{weight,bias}; ReLUs occupy the odd slots.
      convs.push_back(register_module("features_" + std::to_string(index),
                                      torch::nn::Conv2d(torch::nn::Conv2dOptions(in, c, 3).padding(1))));
      pool_after.push_back(false);
      in = c;
      index += 2;
    }
    pool_after.back() = false;  // features end at conv5_4
    if (!cfg_.weights.empty()) {
      const auto container = read_checkpoint(cfg_.weights);
      load_module(container, "vgg19/", *this);
    }
  } else {
    throw Error(ErrorCode::kConfig, "unknown extractor kind '" + cfg_.kind + "'");
  }
  for (auto& p : parameters()) p.set_requires_grad(false);
}

torch::Tensor FeatureExtractorImpl::forward(const torch::Tensor& image) {
  auto x = image;
  if (cfg_.kind == "vgg19") {
    const auto opts = torch::TensorOptions().dtype(image.dtype());
    const auto mean = torch::tensor({0.485, 0.456, 0.406}, opts).view({1, 3, 1, 1});
    const auto stdev = torch::tensor({0.229, 0.224, 0.225}, opts).view({1, 3, 1, 1});
    x = ((x + 1.0) * 0.5 - mean) / stdev;
  }
  for (std::size_t i = 0; i < convs.size(); ++i) {
    x = convs[i]->forward(x);
    if (i + 1 == convs.size()) break;
    x = torch::relu(x);
    if (pool_after[i]) x = torch::max_pool2d(x, 2);
  }
  return x;
}

torch::Tensor perceptual_loss(const torch::Tensor& fake, const torch::Tensor& real, FeatureExtractor& phi) {
  if (fake.sizes() != real.sizes()) throw Error(ErrorCode::kShape, "perceptual loss inputs differ in shape");
  return (phi->forward(fake) - phi->forward(real)).abs().mean();
}

double lr_at(std::int64_t iteration, const LrSchedule& s) {
  if (iteration < 0) throw Error(ErrorCode::kRange, "iteration must be >= 0");
  return s.base * std::pow(s.decay, static_cast<double>(iteration / s.every));
}

Adam::Adam(std::vector<torch::Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(torch::zeros_like(p));
    v_.push_back(torch::zeros_like(p));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_)
    if (p.grad().defined()) p.mutable_grad().zero_();
}

void Adam::step(double lr) {
  torch::NoGradGuard guard;
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& g = params_[i].grad();
    if (!g.defined()) continue;
    m_[i].mul_(beta1_).add_(g, 1.0 - beta1_);
    v_[i].mul_(beta2_).addcmul_(g, g, 1.0 - beta2_);
    const auto denom = (v_[i] / c2).sqrt_().add_(eps_);
    params_[i].addcdiv_(m_[i], denom, -lr / c1);
  }
}

}  // namespace histosynth
