#include "histosynth/networks.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

#include "histosynth/error.hpp"
#include "histosynth/objectives.hpp"

namespace histosynth::net {
namespace F = torch::nn::functional;

namespace {

torch::Tensor unit(const torch::Tensor& x) { return x / x.norm().clamp_min(1e-12); }

torch::Tensor leaky(const torch::Tensor& x) { return torch::leaky_relu(x, kLeakySlope); }

}  // namespace

// ---------------------------------------------------------------------------
// Spectral normalization

SpectralNormState make_spectral_state(std::int64_t rows, Rng& rng, torch::Dtype dtype) {
  std::vector<double> values(rows);
  for (auto& v : values) v = rng.normal();
  SpectralNormState s;
  s.u = unit(torch::tensor(values, torch::kDouble)).to(dtype);
  return s;
}

torch::Tensor spectral_normalize(const torch::Tensor& w, SpectralNormState& s, int n_iter) {
  if (!s.u.defined() || s.u.numel() != w.size(0))
    throw Error(ErrorCode::kShape, "spectral state length does not match the weight's leading dimension");
  const auto mat = w.reshape({w.size(0), -1});
  torch::Tensor u, v;
  {
    torch::NoGradGuard guard;
    const auto m = mat.detach();
    if (m.abs().max().item<double>() == 0.0) {
      s.degenerate = true;
      return w;
    }
    s.degenerate = false;
    u = s.u.to(m.dtype());
    v = unit(m.t().mv(u));
    for (int i = 0; i < n_iter; ++i) {
      v = unit(m.t().mv(u));
      u = unit(m.mv(v));
    }
    s.u = u;
    s.iterations += n_iter;
  }
  const auto sigma = torch::dot(u, mat.mv(v));
  return w / sigma;
}

double top_singular_value(const torch::Tensor& w) {
  const auto mat = w.detach().to(torch::kDouble).reshape({w.size(0), -1});
  return torch::linalg_svdvals(mat)[0].item<double>();
}

// ---------------------------------------------------------------------------
// Layers

SNConv2dImpl::SNConv2dImpl(ConvSpec spec, Rng& rng) : spec_(spec) {
  if (spec.in < 1 || spec.out < 1 || spec.kernel < 1 || spec.stride < 1)
    throw Error(ErrorCode::kConfig, "invalid convolution spec");
  auto w = torch::empty({spec.out, spec.in, spec.kernel, spec.kernel});
  const auto area = spec.kernel * spec.kernel;
  glorot_fill(w, spec.in * area, spec.out * area, rng);
  weight = register_parameter("weight", w);
  if (spec.bias) bias = register_parameter("bias", torch::zeros({spec.out}));
  if (spec.spectral) {
    auto state = make_spectral_state(spec.out, rng);
    sn_u = register_buffer("sn_u", state.u);
    sn_v = register_buffer("sn_v", unit(w.detach().reshape({spec.out, -1}).t().mv(state.u)));
  }
}

torch::Tensor SNConv2dImpl::effective_weight() const {
  if (!spec_.spectral) return weight;
  const auto mat = weight.reshape({spec_.out, -1});
  const auto sigma = torch::dot(sn_u, mat.mv(sn_v));
  if (std::abs(sigma.item<double>()) < 1e-12) return weight;  // zero weight: leave unscaled
  return weight / sigma;
}

void SNConv2dImpl::power_iterate(int n) {
  if (!spec_.spectral) return;
  torch::NoGradGuard guard;
  const auto mat = weight.reshape({spec_.out, -1});
  if (mat.abs().max().item<double>() == 0.0) return;
  auto u = sn_u.clone(), v = sn_v.clone();
  for (int i = 0; i < n; ++i) {
    v = unit(mat.t().mv(u));
    u = unit(mat.mv(v));
  }
  sn_u.copy_(u);
  sn_v.copy_(v);
}

torch::Tensor SNConv2dImpl::forward(const torch::Tensor& x) const {
  const auto k = spec_.kernel;
  // Output size ceil(n / stride): pad (k-1)/2 before and k/2 after.
  const auto before = (k - 1) / 2, after = k / 2;
  if (before == after)
    return torch::conv2d(x, effective_weight(), bias, std::array<std::int64_t, 2>{spec_.stride, spec_.stride},
                         std::array<std::int64_t, 2>{before, before});
  const auto padded = torch::constant_pad_nd(x, {before, after, before, after});
  const std::array<std::int64_t, 2> stride{spec_.stride, spec_.stride}, none{0, 0};
  return torch::conv2d(padded, effective_weight(), bias, stride, none);
}

BatchNorm2dImpl::BatchNorm2dImpl(std::int64_t channels, bool affine, double momentum, double eps)
    : momentum_(momentum), eps_(eps) {
  running_mean = register_buffer("running_mean", torch::zeros({channels}));
  running_var = register_buffer("running_var", torch::ones({channels}));
  if (affine) {
    weight = register_parameter("weight", torch::ones({channels}));
    bias = register_parameter("bias", torch::zeros({channels}));
  }
}

torch::Tensor BatchNorm2dImpl::forward(const torch::Tensor& x, Mode mode) {
  if (x.dim() != 4 || x.size(1) != running_mean.size(0))
    throw Error(ErrorCode::kShape, "normalization expects (N, " + std::to_string(running_mean.size(0)) + ", H, W)");
  torch::Tensor mean, var;
  if (mode == Mode::kTrain) {
    mean = x.mean({0, 2, 3});
    var = x.var({0, 2, 3}, /*unbiased=*/false);
    torch::NoGradGuard guard;
    running_mean.mul_(momentum_).add_(mean.detach(), 1.0 - momentum_);
    running_var.mul_(momentum_).add_(var.detach(), 1.0 - momentum_);
  } else {
    mean = running_mean;
    var = running_var;
  }
  auto y = (x - mean.view({1, -1, 1, 1})) / torch::sqrt(var.view({1, -1, 1, 1}) + eps_);
  if (weight.defined()) y = y * weight.view({1, -1, 1, 1}) + bias.view({1, -1, 1, 1});
  return y;
}

torch::Tensor resize_labels(const torch::Tensor& onehot, std::int64_t h, std::int64_t w) {
  if (onehot.size(2) == h && onehot.size(3) == w) return onehot;
  return F::interpolate(onehot, F::InterpolateFuncOptions().size(std::vector<std::int64_t>{h, w}).mode(torch::kNearest));
}

SpadeNormImpl::SpadeNormImpl(SpadeOptions opts, Rng& rng) : opts_(opts) {
  if (opts.channels < 1 || opts.num_classes < 1 || opts.hidden < 1) throw Error(ErrorCode::kConfig, "invalid SPADE options");
  norm = register_module("norm", BatchNorm2d(opts.channels, /*affine=*/false));
  shared = register_module("shared", SNConv2d(ConvSpec{opts.num_classes, opts.hidden, 3, 1, true, opts.spectral}, rng));
  gamma = register_module("gamma", SNConv2d(ConvSpec{opts.hidden, opts.channels, 3, 1, true, opts.spectral}, rng));
  beta = register_module("beta", SNConv2d(ConvSpec{opts.hidden, opts.channels, 3, 1, true, opts.spectral}, rng));
}

std::pair<torch::Tensor, torch::Tensor> SpadeNormImpl::modulation(const torch::Tensor& onehot_resized) const {
  const auto h = torch::relu(shared->forward(onehot_resized));
  return {1.0 + gamma->forward(h), beta->forward(h)};
}

torch::Tensor SpadeNormImpl::forward(const torch::Tensor& x, const torch::Tensor& onehot, Mode mode) {
  if (x.dim() != 4 || x.size(1) != opts_.channels)
    throw Error(ErrorCode::kShape, "SPADE expects " + std::to_string(opts_.channels) + " channels, got " +
                                       (x.dim() == 4 ? std::to_string(x.size(1)) : std::string("a non-4D tensor")));
  if (onehot.dim() != 4 || onehot.size(1) != opts_.num_classes || onehot.size(0) != x.size(0))
    throw Error(ErrorCode::kShape, "SPADE label volume does not match the class count or batch");
  const auto normalized = norm->forward(x, mode);
  const auto [g, b] = modulation(resize_labels(onehot, x.size(2), x.size(3)));
  return normalized * g + b;
}

SpadeResBlockImpl::SpadeResBlockImpl(std::int64_t in, std::int64_t out, std::int64_t num_classes, std::int64_t hidden,
                                     bool spectral, Rng& rng) {
  const auto mid = std::min(in, out);
  norm_0 = register_module("norm_0", SpadeNorm(SpadeOptions{in, num_classes, hidden, spectral}, rng));
  conv_0 = register_module("conv_0", SNConv2d(ConvSpec{in, mid, 3, 1, true, spectral}, rng));
  norm_1 = register_module("norm_1", SpadeNorm(SpadeOptions{mid, num_classes, hidden, spectral}, rng));
  conv_1 = register_module("conv_1", SNConv2d(ConvSpec{mid, out, 3, 1, true, spectral}, rng));
  if (in != out) {
    norm_skip = register_module("norm_skip", SpadeNorm(SpadeOptions{in, num_classes, hidden, spectral}, rng));
    skip_conv = register_module("skip_conv", SNConv2d(ConvSpec{in, out, 1, 1, false, spectral}, rng));
  }
}

torch::Tensor SpadeResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& onehot, Mode mode) {
  auto dx = conv_0->forward(leaky(norm_0->forward(x, onehot, mode)));
  dx = conv_1->forward(leaky(norm_1->forward(dx, onehot, mode)));
  const auto skip = skip_conv ? skip_conv->forward(norm_skip->forward(x, onehot, mode)) : x;
  return skip + dx;
}

// ---------------------------------------------------------------------------
// Generator

int GeneratorConfig::stages() const {
  if (resolution < 4 || !std::has_single_bit(static_cast<unsigned>(resolution))) return -1;
  return std::countr_zero(static_cast<unsigned>(resolution)) - 2;
}

std::vector<int> GeneratorConfig::stage_channels() const {
  const int s = stages();
  std::vector<int> out;
  for (int i = 0; i < s; ++i)
    out.push_back(i < static_cast<int>(channel_schedule.size()) ? channel_schedule[i] : channel_schedule.back());
  return out;
}

void GeneratorConfig::validate() const {
  if (resolution < 16 || !std::has_single_bit(static_cast<unsigned>(resolution)))
    throw Error(ErrorCode::kConfig, "output resolution must be a power of two >= 16, got " + std::to_string(resolution));
  if (latent_dim < 1 || base_channels < 1 || spade_hidden < 1) throw Error(ErrorCode::kConfig, "widths must be >= 1");
  if (num_classes < 2 || num_classes > 256) throw Error(ErrorCode::kConfig, "class count must be in [2, 256]");
  if (channel_schedule.empty() || std::any_of(channel_schedule.begin(), channel_schedule.end(), [](int c) { return c < 1; }))
    throw Error(ErrorCode::kConfig, "channel schedule must be non-empty and positive");
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"latent_dim", latent_dim},         {"base_channels", base_channels}, {"resolution", resolution},
          {"num_classes", num_classes},       {"spade_hidden", spade_hidden},   {"channel_schedule", channel_schedule},
          {"spectral_norm", spectral_norm}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.resolution = j.value("resolution", c.resolution);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.spade_hidden = j.value("spade_hidden", c.spade_hidden);
  c.channel_schedule = j.value("channel_schedule", c.channel_schedule);
  c.spectral_norm = j.value("spectral_norm", c.spectral_norm);
  return c;
}

GeneratorImpl::GeneratorImpl(GeneratorConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const std::int64_t dense_out = static_cast<std::int64_t>(cfg_.base_channels) * 16;
  dense = register_module("dense", torch::nn::Linear(cfg_.latent_dim, dense_out));
  {
    torch::NoGradGuard guard;
    auto w = torch::empty_like(dense->weight);
    glorot_fill(w, cfg_.latent_dim, dense_out, rng);
    dense->weight.copy_(w);
    dense->bias.zero_();
  }
  std::int64_t in = cfg_.base_channels;
  const auto channels = cfg_.stage_channels();
  for (std::size_t i = 0; i < channels.size(); ++i) {
    blocks.push_back(register_module("block_" + std::to_string(i),
                                     SpadeResBlock(in, channels[i], cfg_.num_classes, cfg_.spade_hidden,
                                                   cfg_.spectral_norm, rng)));
    in = channels[i];
  }
  to_rgb = register_module("to_rgb", SNConv2d(ConvSpec{in, 3, 3, 1, true, cfg_.spectral_norm}, rng));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& z, const torch::Tensor& onehot, Mode mode,
                                     std::vector<std::int64_t>* trace) {
  if (z.dim() != 2 || z.size(1) != cfg_.latent_dim)
    throw Error(ErrorCode::kShape, "latent batch must be (B, " + std::to_string(cfg_.latent_dim) + ")");
  if (onehot.dim() != 4 || onehot.size(0) != z.size(0) || onehot.size(1) != cfg_.num_classes ||
      onehot.size(2) != cfg_.resolution || onehot.size(3) != cfg_.resolution)
    throw Error(ErrorCode::kShape, "label volume must be (B, " + std::to_string(cfg_.num_classes) + ", " +
                                       std::to_string(cfg_.resolution) + ", " + std::to_string(cfg_.resolution) + ")");
  auto x = dense->forward(z).view({z.size(0), cfg_.base_channels, 4, 4});
  for (auto& block : blocks) {
    if (trace) trace->push_back(x.size(2));
    x = block->forward(x, onehot, mode);
    x = F::interpolate(x, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
  }
  if (trace) trace->push_back(x.size(2));
  return torch::tanh(to_rgb->forward(leaky(x)));
}

// ---------------------------------------------------------------------------
// Discriminators

void DiscriminatorConfig::validate() const {
  if (num_classes < 1) throw Error(ErrorCode::kConfig, "class count must be >= 1");
  if (channels.empty() || std::any_of(channels.begin(), channels.end(), [](int c) { return c < 1; }))
    throw Error(ErrorCode::kConfig, "discriminator channels must be non-empty and positive");
  if (kernel < 1 || num_scales < 1) throw Error(ErrorCode::kConfig, "kernel and scale count must be >= 1");
}

nlohmann::json DiscriminatorConfig::to_json() const {
  return {{"num_classes", num_classes}, {"channels", channels}, {"kernel", kernel},
          {"num_scales", num_scales},   {"spectral_norm", spectral_norm}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const nlohmann::json& j) {
  DiscriminatorConfig c;
  c.num_classes = j.value("num_classes", c.num_classes);
  c.channels = j.value("channels", c.channels);
  c.kernel = j.value("kernel", c.kernel);
  c.num_scales = j.value("num_scales", c.num_scales);
  c.spectral_norm = j.value("spectral_norm", c.spectral_norm);
  return c;
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const DiscriminatorConfig& cfg, Rng& rng) {
  cfg.validate();
  std::int64_t in = cfg.num_classes + 3;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    const std::int64_t out = cfg.channels[i];
    convs.push_back(register_module("conv_" + std::to_string(i),
                                    SNConv2d(ConvSpec{in, out, cfg.kernel, 2, true, cfg.spectral_norm}, rng)));
    norms.push_back(register_module("norm_" + std::to_string(i),
                                    torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(out).affine(true))));
    in = out;
  }
  score = register_module("score", SNConv2d(ConvSpec{in, 1, cfg.kernel, 1, true, cfg.spectral_norm}, rng));
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& input) {
  auto x = input;
  for (std::size_t i = 0; i < convs.size(); ++i) x = leaky(norms[i]->forward(convs[i]->forward(x)));
  return score->forward(x);
}

MultiScaleDiscriminatorImpl::MultiScaleDiscriminatorImpl(DiscriminatorConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (int s = 0; s < cfg_.num_scales; ++s)
    scales.push_back(register_module("scale_" + std::to_string(s), PatchDiscriminator(cfg_, rng)));
}

std::vector<torch::Tensor> MultiScaleDiscriminatorImpl::forward(const torch::Tensor& onehot, const torch::Tensor& image) {
  if (onehot.size(1) != cfg_.num_classes || image.size(1) != 3)
    throw Error(ErrorCode::kShape, "discriminator expects K label channels and 3 image channels");
  auto input = torch::cat({onehot, image}, 1);
  std::vector<torch::Tensor> out;
  for (std::size_t s = 0; s < scales.size(); ++s) {
    if (s > 0) input = downsample2x(input);
    out.push_back(scales[s]->forward(input));
  }
  return out;
}

torch::Tensor downsample2x(const torch::Tensor& x) {
  if (x.dim() < 2 || x.size(-1) % 2 != 0 || x.size(-2) % 2 != 0)
    throw Error(ErrorCode::kShape, "2x downsampling needs even spatial dimensions");
  if (x.dim() == 3) return torch::avg_pool2d(x.unsqueeze(0), 2).squeeze(0);
  return torch::avg_pool2d(x, 2);
}

std::vector<SNConv2d> spectral_convs(torch::nn::Module& root) {
  std::vector<SNConv2d> out;
  for (const auto& m : root.modules(/*include_self=*/true))
    if (auto conv = std::dynamic_pointer_cast<SNConv2dImpl>(m); conv && conv->spec().spectral) out.emplace_back(conv);
  return out;
}

void power_iterate_all(torch::nn::Module& root, int n) {
  for (auto& conv : spectral_convs(root)) conv->power_iterate(n);
}

// ---------------------------------------------------------------------------
// Conversion and inference

torch::Tensor one_hot(const std::vector<LabelMap>& maps, int num_classes) {
  if (maps.empty()) throw Error(ErrorCode::kInvalidArgument, "empty label batch");
  const int h = maps.front().height, w = maps.front().width;
  auto idx = torch::empty({static_cast<std::int64_t>(maps.size()), h, w}, torch::kUInt8);
  for (std::size_t b = 0; b < maps.size(); ++b) {
    LabelMap m = maps[b];
    m.num_classes = num_classes;
    validate(m);
    if (m.height != h || m.width != w) throw Error(ErrorCode::kShape, "label maps in a batch must share dimensions");
    std::memcpy(idx[b].data_ptr<std::uint8_t>(), m.values.data(), m.values.size());
  }
  return torch::one_hot(idx.to(torch::kLong), num_classes).permute({0, 3, 1, 2}).to(torch::kFloat).contiguous();
}

torch::Tensor to_tensor(const std::vector<NormImage>& images) {
  if (images.empty()) throw Error(ErrorCode::kInvalidArgument, "empty image batch");
  const int h = images.front().height, w = images.front().width;
  auto out = torch::empty({static_cast<std::int64_t>(images.size()), h, w, 3});
  for (std::size_t b = 0; b < images.size(); ++b) {
    if (images[b].height != h || images[b].width != w) throw Error(ErrorCode::kShape, "images in a batch must match");
    std::memcpy(out[b].data_ptr<float>(), images[b].data.data(), images[b].data.size() * sizeof(float));
  }
  return out.permute({0, 3, 1, 2}).contiguous();
}

torch::Tensor to_tensor(const std::vector<ByteImage>& images) {
  std::vector<NormImage> norm;
  norm.reserve(images.size());
  for (const auto& img : images) norm.push_back(normalize(img));
  return to_tensor(norm);
}

torch::Tensor to_tensor(const std::vector<LatentVector>& latents) {
  if (latents.empty()) throw Error(ErrorCode::kInvalidArgument, "empty latent batch");
  auto out = torch::empty({static_cast<std::int64_t>(latents.size()), static_cast<std::int64_t>(latents.front().size())});
  for (std::size_t b = 0; b < latents.size(); ++b)
    std::memcpy(out[b].data_ptr<float>(), latents[b].values().data(), latents[b].size() * sizeof(float));
  return out;
}

NormImage to_norm_image(const torch::Tensor& chw) {
  if (chw.dim() != 3 || chw.size(0) != 3) throw Error(ErrorCode::kShape, "expected a (3, H, W) tensor");
  const auto hwc = chw.detach().to(torch::kFloat).permute({1, 2, 0}).contiguous();
  NormImage img{static_cast<int>(chw.size(2)), static_cast<int>(chw.size(1)),
                std::vector<float>(static_cast<std::size_t>(hwc.numel()))};
  std::memcpy(img.data.data(), hwc.data_ptr<float>(), img.data.size() * sizeof(float));
  return img;
}

NormImage generate(Generator& g, const LabelMap& m, const LatentVector& z, Mode mode) {
  const auto& cfg = g->config();
  if (m.width != cfg.resolution || m.height != cfg.resolution)
    throw Error(ErrorCode::kShape, "label map is " + std::to_string(m.width) + "x" + std::to_string(m.height) +
                                       ", model expects " + std::to_string(cfg.resolution) + "x" +
                                       std::to_string(cfg.resolution));
  if (static_cast<int>(z.size()) != cfg.latent_dim) throw Error(ErrorCode::kShape, "latent length mismatch");
  torch::NoGradGuard guard;
  const auto out = g->forward(to_tensor(std::vector<LatentVector>{z}), one_hot({m}, cfg.num_classes), mode);
  return to_norm_image(out[0]);
}

void glorot_fill(torch::Tensor& w, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  const auto values = glorot_init(fan_in, fan_out, static_cast<std::size_t>(w.numel()), rng);
  torch::NoGradGuard guard;
  w.copy_(torch::tensor(values, torch::kDouble).view(w.sizes()).to(w.dtype()));
}

}  // namespace histosynth::net
