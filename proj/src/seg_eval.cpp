#include "histosynth/seg_eval.hpp"

#include <cmath>

#include "histosynth/error.hpp"

namespace histosynth::seg {
namespace F = torch::nn::functional;
using net::ConvSpec;
using net::Mode;

void SegConfig::validate() const {
  if (num_classes < 2 || num_classes > 256) throw Error(ErrorCode::kConfig, "class count must be in [2, 256]");
  if (base_features < 1 || batch_size < 1) throw Error(ErrorCode::kConfig, "features and batch size must be >= 1");
  if (crop_size < 8 || crop_size % 8 != 0)
    throw Error(ErrorCode::kConfig, "crop size must be a positive multiple of 8, got " + std::to_string(crop_size));
  if (iterations < 0) throw Error(ErrorCode::kConfig, "iterations must be >= 0");
}

SegConfig desk_preset(int num_classes) {
  SegConfig c;
  c.num_classes = num_classes;
  c.base_features = 16;
  c.crop_size = 64;
  return c;
}

nlohmann::json SegConfig::to_json() const {
  return {{"num_classes", num_classes}, {"base_features", base_features}, {"crop_size", crop_size},
          {"batch_size", batch_size},   {"lr", schedule.base},            {"lr_decay", schedule.decay},
          {"lr_decay_every", schedule.every}, {"beta1", beta1},          {"beta2", beta2},
          {"iterations", iterations},   {"seed", seed}};
}

SegConfig SegConfig::from_json(const nlohmann::json& j) {
  SegConfig c;
  c.num_classes = j.value("num_classes", c.num_classes);
  c.base_features = j.value("base_features", c.base_features);
  c.crop_size = j.value("crop_size", c.crop_size);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.schedule.base = j.value("lr", c.schedule.base);
  c.schedule.decay = j.value("lr_decay", c.schedule.decay);
  c.schedule.every = j.value("lr_decay_every", c.schedule.every);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.iterations = j.value("iterations", c.iterations);
  c.seed = j.value("seed", c.seed);
  return c;
}

ResidualBlockImpl::ResidualBlockImpl(std::int64_t channels, Rng& rng) {
  conv_0 = register_module("conv_0", net::SNConv2d(ConvSpec{channels, channels, 3, 1, true, false}, rng));
  bn_0 = register_module("bn_0", net::BatchNorm2d(channels, true));
  conv_1 = register_module("conv_1", net::SNConv2d(ConvSpec{channels, channels, 3, 1, true, false}, rng));
  bn_1 = register_module("bn_1", net::BatchNorm2d(channels, true));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x, Mode mode) {
  auto y = torch::relu(bn_0->forward(conv_0->forward(x), mode));
  y = bn_1->forward(conv_1->forward(y), mode);
  return torch::relu(y + x);
}

UnitImpl::UnitImpl(std::int64_t in, std::int64_t out, Rng& rng) {
  conv = register_module("conv", net::SNConv2d(ConvSpec{in, out, 3, 1, true, false}, rng));
  bn = register_module("bn", net::BatchNorm2d(out, true));
  res = register_module("res", ResidualBlock(out, rng));
}

torch::Tensor UnitImpl::forward(const torch::Tensor& x, Mode mode) {
  return res->forward(torch::relu(bn->forward(conv->forward(x), mode)), mode);
}

SegNetImpl::SegNetImpl(const SegConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::int64_t f = cfg.base_features;
  std::int64_t in = 3;
  for (int i = 0; i < 3; ++i) {
    const std::int64_t out = f << i;
    down.push_back(register_module("down_" + std::to_string(i), Unit(in, out, rng)));
    in = out;
  }
  bridge = register_module("bridge", Unit(in, f << 3, rng));
  in = f << 3;
  for (int i = 2; i >= 0; --i) {
    const std::int64_t skip = f << i;
    up.push_back(register_module("up_" + std::to_string(2 - i), Unit(in + skip, skip, rng)));
    in = skip;
  }
  head = register_module("head", net::SNConv2d(ConvSpec{in, cfg.num_classes, 1, 1, true, false}, rng));
}

torch::Tensor SegNetImpl::forward(const torch::Tensor& x, Mode mode, std::vector<std::int64_t>* trace) {
  if (x.dim() != 4 || x.size(1) != 3 || x.size(2) % 8 != 0 || x.size(3) % 8 != 0)
    throw Error(ErrorCode::kShape, "segmentation input must be (B, 3, H, W) with H, W divisible by 8");
  std::vector<torch::Tensor> skips;
  auto h = x;
  for (auto& block : down) {
    h = block->forward(h, mode);
    skips.push_back(h);
    h = torch::max_pool2d(h, 2);
  }
  h = bridge->forward(h, mode);
  if (trace) trace->push_back(h.size(2)), trace->push_back(h.size(1));
  for (std::size_t i = 0; i < up.size(); ++i) {
    const auto& skip = skips[skips.size() - 1 - i];
    h = F::interpolate(h, F::InterpolateFuncOptions()
                              .size(std::vector<std::int64_t>{skip.size(2), skip.size(3)})
                              .mode(torch::kBilinear)
                              .align_corners(false));
    h = up[i]->forward(torch::cat({h, skip}, 1), mode);
  }
  return head->forward(h);
}

LabelMap argmax_labels(const torch::Tensor& logits) {
  if (logits.dim() != 3) throw Error(ErrorCode::kShape, "expected (K, H, W) logits");
  const auto k = static_cast<int>(logits.size(0));
  const auto h = static_cast<int>(logits.size(1)), w = static_cast<int>(logits.size(2));
  const auto c = logits.detach().to(torch::kFloat).contiguous();
  const float* p = c.data_ptr<float>();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  LabelMap out(w, h, k);
  for (std::size_t i = 0; i < plane; ++i) {
    int best = 0;
    for (int ch = 1; ch < k; ++ch)
      if (p[ch * plane + i] > p[best * plane + i]) best = ch;
    out.values[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelMap predict(SegNet& model, const ByteImage& img, int num_classes) {
  if (img.width % 8 != 0 || img.height % 8 != 0)
    throw Error(ErrorCode::kShape, "image dimensions must be divisible by 8");
  torch::NoGradGuard guard;
  const auto logits = model->forward(net::to_tensor(std::vector<ByteImage>{img}), Mode::kInfer);
  if (logits.size(1) != num_classes) throw Error(ErrorCode::kShape, "model class count differs from the request");
  return argmax_labels(logits[0]);
}

SegTrainer::SegTrainer(SegConfig cfg) : cfg_(std::move(cfg)), rng_(Rng::derive(cfg_.seed, 2)) {
  cfg_.validate();
  Rng init(cfg_.seed);
  model_ = SegNet(cfg_, init);
  opt_ = std::make_unique<Adam>(model_->parameters(), cfg_.beta1, cfg_.beta2);
}

SegTrainer SegTrainer::from_checkpoint(const Container& c) {
  if (c.text("meta/kind") != "seg") throw Error(ErrorCode::kConfig, "not a segmentation checkpoint");
  SegTrainer t(SegConfig::from_json(nlohmann::json::parse(c.text("meta/config"))));
  load_module(c, "model/", *t.model_);
  torch::NoGradGuard guard;
  t.opt_->set_steps(c.integer("optim/step"));
  for (std::size_t i = 0; i < t.opt_->first_moments().size(); ++i) {
    t.opt_->first_moments()[i].copy_(c.tensor("optim/m/" + std::to_string(i)));
    t.opt_->second_moments()[i].copy_(c.tensor("optim/v/" + std::to_string(i)));
  }
  t.iteration_ = c.integer("meta/iteration");
  t.rng_.set_state(c.text("meta/rng"));
  return t;
}

Container SegTrainer::checkpoint() const {
  Container c;
  c.put_text("meta/kind", "seg");
  c.put_text("meta/config", cfg_.to_json().dump());
  c.put_int("meta/iteration", iteration_);
  c.put_text("meta/rng", rng_.state());
  put_module(c, "model/", *model_);
  c.put_int("optim/step", opt_->steps());
  for (std::size_t i = 0; i < opt_->first_moments().size(); ++i) {
    c.put_tensor("optim/m/" + std::to_string(i), opt_->first_moments()[i]);
    c.put_tensor("optim/v/" + std::to_string(i), opt_->second_moments()[i]);
  }
  return c;
}

double SegTrainer::step(const std::vector<stain::PatchPair>& data) {
  if (data.empty()) throw Error(ErrorCode::kConfig, "training set is empty");
  const int crop = cfg_.crop_size;
  std::vector<ByteImage> images;
  std::vector<LabelMap> labels;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const auto& pair = data[rng_.uniform_int(static_cast<std::int64_t>(data.size()))];
    if (pair.image.width < crop || pair.image.height < crop)
      throw Error(ErrorCode::kPatchTooLarge, "crop size exceeds a training patch");
    const int oy = static_cast<int>(rng_.uniform_int(pair.image.height - crop + 1));
    const int ox = static_cast<int>(rng_.uniform_int(pair.image.width - crop + 1));
    ByteImage img(crop, crop);
    LabelMap lab(crop, crop, cfg_.num_classes);
    for (int y = 0; y < crop; ++y) {
      std::copy_n(&pair.image.at(oy + y, ox, 0), crop * 3, &img.at(y, 0, 0));
      std::copy_n(&pair.label.values[static_cast<std::size_t>(oy + y) * pair.label.width + ox], crop, &lab.at(y, 0));
    }
    images.push_back(std::move(img));
    labels.push_back(std::move(lab));
  }
  auto target = torch::empty({cfg_.batch_size, crop, crop}, torch::kLong);
  for (int b = 0; b < cfg_.batch_size; ++b) {
    validate(labels[b]);
    auto row = torch::from_blob(labels[b].values.data(), {crop, crop}, torch::kUInt8);
    target[b].copy_(row.to(torch::kLong));
  }
  const double lr = lr_at(iteration_, cfg_.schedule);
  opt_->zero_grad();
  const auto logits = model_->forward(net::to_tensor(images), Mode::kTrain);
  const auto loss = F::cross_entropy(logits, target);
  const double value = loss.item<double>();
  if (!std::isfinite(value)) throw Error(ErrorCode::kNonFiniteLoss, "segmentation loss is not finite");
  loss.backward();
  opt_->step(lr);
  ++iteration_;
  return value;
}

SegTrainResult train_seg(SegTrainer& trainer, const std::vector<stain::PatchPair>& data, std::int64_t until) {
  SegTrainResult result;
  const int k = trainer.config().num_classes;
  std::vector<bool> seen(k, false);
  for (const auto& p : data)
    for (auto v : p.label.values)
      if (v < k) seen[v] = true;
  for (int c = 0; c < k; ++c)
    if (!seen[c]) result.absent_classes.push_back(c);
  const std::int64_t target = until >= 0 ? until : trainer.config().iterations;
  while (trainer.iteration() < target) result.losses.push_back(trainer.step(data));
  return result;
}

SegNet load_seg_model(const std::filesystem::path& path, SegConfig* cfg_out) {
  const auto c = read_checkpoint(path);
  if (c.text("meta/kind") != "seg") throw Error(ErrorCode::kConfig, path.string() + " is not a segmentation checkpoint");
  const auto cfg = SegConfig::from_json(nlohmann::json::parse(c.text("meta/config")));
  Rng init(cfg.seed);
  SegNet model(cfg, init);
  load_module(c, "model/", *model);
  if (cfg_out) *cfg_out = cfg;
  return model;
}

metrics::SegMetrics evaluate_model(SegNet& model, const std::vector<stain::PatchPair>& data, int num_classes) {
  metrics::MetricAccumulator acc(num_classes);
  for (const auto& p : data) acc.add(predict(model, p.image, num_classes), p.label);
  return acc.finish();
}

}  // namespace histosynth::seg
