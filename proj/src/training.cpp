#include "histosynth/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "histosynth/image_io.hpp"

namespace histosynth::train {
namespace {

constexpr std::uint64_t kSampleStream = 0x5a4d504c45ULL;  // fixed latents for sample grids

void put_adam(Container& c, const std::string& prefix, Adam& opt) {
  c.put_int(prefix + "step", opt.steps());
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    c.put_tensor(prefix + "m/" + std::to_string(i), opt.first_moments()[i]);
    c.put_tensor(prefix + "v/" + std::to_string(i), opt.second_moments()[i]);
  }
}

void load_adam(const Container& c, const std::string& prefix, Adam& opt) {
  torch::NoGradGuard guard;
  opt.set_steps(c.integer(prefix + "step"));
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    auto& m = opt.first_moments()[i];
    auto& v = opt.second_moments()[i];
    const auto ms = c.tensor(prefix + "m/" + std::to_string(i));
    const auto vs = c.tensor(prefix + "v/" + std::to_string(i));
    if (ms.sizes() != m.sizes() || vs.sizes() != v.sizes())
      throw Error(ErrorCode::kCorruption, "optimizer state '" + prefix + "' does not match the model");
    m.copy_(ms);
    v.copy_(vs);
  }
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void TrainConfig::validate() const {
  generator.validate();
  discriminator.validate();
  if (generator.num_classes != discriminator.num_classes)
    throw Error(ErrorCode::kConfig, "generator and discriminator class counts differ");
  if (iterations < 0) throw Error(ErrorCode::kConfig, "iterations must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::kConfig, "batch size must be >= 1");
  if (!(schedule.base > 0.0) || !(schedule.decay > 0.0) || schedule.every < 1)
    throw Error(ErrorCode::kConfig, "learning-rate schedule must be positive");
  if (weights.gan < 0.0 || weights.perceptual < 0.0) throw Error(ErrorCode::kConfig, "loss weights must be >= 0");
  if (spectral_iterations < 1) throw Error(ErrorCode::kConfig, "spectral iterations must be >= 1");
}

TrainConfig desk_preset(int num_classes) {
  TrainConfig c;
  c.generator.resolution = 64;
  c.generator.num_classes = num_classes;
  c.generator.base_channels = 64;
  c.generator.channel_schedule = {64, 64, 32, 16};
  c.generator.spade_hidden = 32;
  c.discriminator.num_classes = num_classes;
  c.discriminator.channels = {16, 32, 64, 128};
  c.extractor.widths = {16, 32, 32};
  c.batch_size = 8;
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"generator", generator.to_json()},
          {"discriminator", discriminator.to_json()},
          {"extractor", extractor.to_json()},
          {"lambda_gan", weights.gan},
          {"lambda_perceptual", weights.perceptual},
          {"iterations", iterations},
          {"batch_size", batch_size},
          {"lr", schedule.base},
          {"lr_decay", schedule.decay},
          {"lr_decay_every", schedule.every},
          {"beta1", beta1},
          {"beta2", beta2},
          {"seed", seed},
          {"checkpoint_interval", checkpoint_interval},
          {"augment", augment},
          {"spectral_iterations", spectral_iterations}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("generator")) c.generator = net::GeneratorConfig::from_json(j.at("generator"));
  if (j.contains("discriminator")) c.discriminator = net::DiscriminatorConfig::from_json(j.at("discriminator"));
  if (j.contains("extractor")) c.extractor = ExtractorConfig::from_json(j.at("extractor"));
  c.weights.gan = j.value("lambda_gan", c.weights.gan);
  c.weights.perceptual = j.value("lambda_perceptual", c.weights.perceptual);
  c.iterations = j.value("iterations", c.iterations);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.schedule.base = j.value("lr", c.schedule.base);
  c.schedule.decay = j.value("lr_decay", c.schedule.decay);
  c.schedule.every = j.value("lr_decay_every", c.schedule.every);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
  c.augment = j.value("augment", c.augment);
  c.spectral_iterations = j.value("spectral_iterations", c.spectral_iterations);
  return c;
}

PairedDataset PairedDataset::from_manifest(const DatasetManifest& manifest, Split split, const ClassPalette& palette) {
  PairedDataset d;
  d.palette = palette;
  for (const auto& r : manifest.select(split)) {
    stain::PatchPair p{io::read_rgb_png(r.image), io::read_label_png(r.label, palette.size())};
    if (p.image.width != p.label.width || p.image.height != p.label.height)
      throw Error(ErrorCode::kAlignment, "dimension mismatch: " + r.image.string());
    validate(p.label);
    d.pairs.push_back(std::move(p));
  }
  return d;
}

GanTrainer::GanTrainer(TrainConfig cfg, ClassPalette palette)
    : cfg_(std::move(cfg)), palette_(std::move(palette)), rng_(Rng::derive(cfg_.seed, 1)) {
  cfg_.validate();
  if (palette_.size() != cfg_.generator.num_classes)
    throw Error(ErrorCode::kConfig, "palette has " + std::to_string(palette_.size()) + " classes, model expects " +
                                        std::to_string(cfg_.generator.num_classes));
  Rng init(cfg_.seed);
  g_ = net::Generator(cfg_.generator, init);
  d_ = net::MultiScaleDiscriminator(cfg_.discriminator, init);
  phi_ = FeatureExtractor(cfg_.extractor);
  opt_g_ = std::make_unique<Adam>(g_->parameters(), cfg_.beta1, cfg_.beta2);
  opt_d_ = std::make_unique<Adam>(d_->parameters(), cfg_.beta1, cfg_.beta2);
}

GanTrainer GanTrainer::from_checkpoint(const Container& c) {
  if (c.text("meta/kind") != "gan") throw Error(ErrorCode::kConfig, "not a GAN checkpoint");
  auto cfg = TrainConfig::from_json(nlohmann::json::parse(c.text("meta/config")));
  // Extractor weights travel inside the checkpoint; never re-read an external file.
  cfg.extractor.weights.clear();
  GanTrainer t(cfg, io::palette_from_json(c.text("meta/palette")));
  load_module(c, "generator/", *t.g_);
  load_module(c, "discriminator/", *t.d_);
  load_module(c, "extractor/", *t.phi_);
  load_adam(c, "optim_g/", *t.opt_g_);
  load_adam(c, "optim_d/", *t.opt_d_);
  t.iteration_ = c.integer("meta/iteration");
  t.rng_.set_state(c.text("meta/rng"));
  return t;
}

Container GanTrainer::checkpoint() const {
  Container c;
  auto cfg = cfg_;
  cfg.extractor.weights.clear();
  c.put_text("meta/kind", "gan");
  c.put_text("meta/config", cfg.to_json().dump());
  c.put_text("meta/palette", io::palette_to_json(palette_));
  c.put_int("meta/iteration", iteration_);
  c.put_text("meta/rng", rng_.state());
  put_module(c, "generator/", *g_);
  put_module(c, "discriminator/", *d_);
  put_module(c, "extractor/", *phi_);
  put_adam(c, "optim_g/", *opt_g_);
  put_adam(c, "optim_d/", *opt_d_);
  return c;
}

double GanTrainer::update_discriminator(const torch::Tensor& onehot, const torch::Tensor& real, const torch::Tensor& fake,
                                       double lr) {
  opt_d_->zero_grad();
  const auto loss = lsgan_d_loss(d_->forward(onehot, real), d_->forward(onehot, fake.detach()));
  const double value = loss.item<double>();
  if (!finite(value)) return value;
  loss.backward();
  opt_d_->step(lr);
  return value;
}

std::pair<double, double> GanTrainer::update_generator(const torch::Tensor& onehot, const torch::Tensor& real,
                                                       const torch::Tensor& fake, double lr) {
  set_requires_grad(*d_, false);
  opt_g_->zero_grad();
  const auto gan = lsgan_g_loss(d_->forward(onehot, fake));
  const auto perc = perceptual_loss(fake, real, phi_);
  const std::pair<double, double> values{gan.item<double>(), perc.item<double>()};
  if (finite(values.first) && finite(values.second)) {
    (cfg_.weights.gan * gan + cfg_.weights.perceptual * perc).backward();
    opt_g_->step(lr);
  }
  set_requires_grad(*d_, true);
  return values;
}

LossRecord GanTrainer::step(const std::vector<stain::PatchPair>& batch, const std::vector<LatentVector>& latents) {
  if (batch.empty() || batch.size() != latents.size())
    throw Error(ErrorCode::kInvalidArgument, "batch and latent counts must match and be non-empty");
  LossRecord rec;
  rec.iteration = iteration_;
  rec.lr = lr_at(iteration_, cfg_.schedule);

  net::power_iterate_all(*g_, cfg_.spectral_iterations);
  net::power_iterate_all(*d_, cfg_.spectral_iterations);

  std::vector<ByteImage> images;
  std::vector<LabelMap> labels;
  for (const auto& p : batch) {
    images.push_back(p.image);
    labels.push_back(p.label);
  }
  const auto real = net::to_tensor(images);
  const auto onehot = net::one_hot(labels, cfg_.generator.num_classes);
  const auto z = net::to_tensor(latents);

  const auto fake = g_->forward(z, onehot, net::Mode::kTrain);
  rec.d_loss = update_discriminator(onehot, real, fake, rec.lr);
  if (!finite(rec.d_loss)) throw TrainingAborted("discriminator loss is not finite", rec);
  const auto [gan, perc] = update_generator(onehot, real, fake, rec.lr);
  rec.g_gan_loss = gan;
  rec.g_perc_loss = perc;
  if (!finite(gan) || !finite(perc)) throw TrainingAborted("generator loss is not finite", rec);
  ++iteration_;
  return rec;
}

LossRecord GanTrainer::step(const PairedDataset& data) {
  if (data.pairs.empty()) throw Error(ErrorCode::kConfig, "dataset is empty");
  std::vector<stain::PatchPair> batch;
  std::vector<LatentVector> latents;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const auto& pair = data.pairs[rng_.uniform_int(static_cast<std::int64_t>(data.pairs.size()))];
    const bool square = pair.image.width == pair.image.height;
    batch.push_back(cfg_.augment && square ? stain::augment(pair, rng_) : pair);
  }
  for (int b = 0; b < cfg_.batch_size; ++b) {
    std::vector<float> z(cfg_.generator.latent_dim);
    for (auto& v : z) v = static_cast<float>(rng_.normal());
    latents.emplace_back(std::move(z));
  }
  return step(batch, latents);
}

std::ostream& operator<<(std::ostream& os, const LossRecord& r) {
  return os << "{iteration " << r.iteration << ", lr " << r.lr << ", d " << r.d_loss << ", g_gan " << r.g_gan_loss
            << ", g_perc " << r.g_perc_loss << "}";
}

std::string loss_log_csv(const std::vector<LossRecord>& log, bool header) {
  std::ostringstream os;
  if (header) os << "iteration,lr,d_loss,g_gan_loss,g_perc_loss\n";
  os << std::setprecision(17);
  for (const auto& r : log)
    os << r.iteration << "," << r.lr << "," << r.d_loss << "," << r.g_gan_loss << "," << r.g_perc_loss << "\n";
  return os.str();
}

ByteImage sample_grid(GanTrainer& trainer, const PairedDataset& data) {
  const auto& cfg = trainer.config().generator;
  Rng rng = Rng::derive(trainer.config().seed, kSampleStream);
  std::vector<LatentVector> latents;
  for (int i = 0; i < 4; ++i) {
    std::vector<float> z(cfg.latent_dim);
    for (auto& v : z) v = static_cast<float>(rng.normal());
    latents.emplace_back(std::move(z));
  }
  std::vector<ByteImage> tiles;
  const std::size_t rows = std::min<std::size_t>(4, data.pairs.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& label = data.pairs[r].label;
    if (label.width != cfg.resolution || label.height != cfg.resolution) continue;
    tiles.push_back(io::colorize(label, trainer.palette()));
    for (const auto& z : latents) tiles.push_back(denormalize(net::generate(trainer.generator(), label, z)));
  }
  if (tiles.empty()) throw Error(ErrorCode::kShape, "no label map matches the generator resolution");
  return io::contact_sheet(tiles, 5);
}

TrainResult train(GanTrainer& trainer, const PairedDataset& data, const RunOptions& opts) {
  if (data.pairs.empty()) throw Error(ErrorCode::kConfig, "dataset is empty");
  const std::int64_t until = opts.until >= 0 ? opts.until : trainer.config().iterations;
  const auto interval = trainer.config().checkpoint_interval;
  const bool writing = !opts.out_dir.empty();
  if (writing) std::filesystem::create_directories(opts.out_dir);

  auto snapshot = [&](const std::string& stem) {
    const auto path = opts.out_dir / (stem + ".hsck");
    write_checkpoint(path, trainer.checkpoint());
    if (opts.write_samples) io::write_png(opts.out_dir / ("samples_" + stem + ".png"), sample_grid(trainer, data));
    return path;
  };

  TrainResult result;
  while (trainer.iteration() < until) {
    result.log.push_back(trainer.step(data));
    if (opts.on_step) opts.on_step(result.log.back());
    if (writing && interval > 0 && trainer.iteration() % interval == 0 && trainer.iteration() < until) {
      std::ostringstream stem;
      stem << "checkpoint_" << std::setw(7) << std::setfill('0') << trainer.iteration();
      snapshot(stem.str());
    }
  }
  if (writing) result.final_checkpoint = snapshot("final");
  return result;
}

SynthesisModel load_synthesis_model(const std::filesystem::path& checkpoint) {
  const auto c = read_checkpoint(checkpoint);
  if (c.text("meta/kind") != "gan") throw Error(ErrorCode::kConfig, checkpoint.string() + " is not a GAN checkpoint");
  SynthesisModel m;
  m.config = TrainConfig::from_json(nlohmann::json::parse(c.text("meta/config")));
  m.palette = io::palette_from_json(c.text("meta/palette"));
  m.iteration = c.integer("meta/iteration");
  Rng init(m.config.seed);
  m.generator = net::Generator(m.config.generator, init);
  load_module(c, "generator/", *m.generator);
  for (auto& p : m.generator->parameters()) p.set_requires_grad(false);
  return m;
}

}  // namespace histosynth::train
