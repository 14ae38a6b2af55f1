#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "histosynth/checkpoint.hpp"
#include "histosynth/data_model.hpp"
#include "histosynth/error.hpp"
#include "histosynth/networks.hpp"
#include "histosynth/objectives.hpp"
#include "histosynth/rng.hpp"
#include "histosynth/stain_prep.hpp"

namespace histosynth::train {

struct LossWeights {
  double gan = 1.0;
  double perceptual = 10.0;
};

struct TrainConfig {
  net::GeneratorConfig generator;
  net::DiscriminatorConfig discriminator;
  ExtractorConfig extractor;
  LossWeights weights;
  std::int64_t iterations = 2000;
  int batch_size = 8;
  LrSchedule schedule{2e-4, 0.95, 1000};
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_interval = 0;  // 0: final checkpoint only
  bool augment = true;
  int spectral_iterations = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Reduced-width configuration for 64x64 data that trains 2,000 iterations in minutes on one CPU core.
TrainConfig desk_preset(int num_classes = 3);

struct LossRecord {
  std::int64_t iteration = 0;
  double lr = 0.0;
  double d_loss = 0.0;
  double g_gan_loss = 0.0;
  double g_perc_loss = 0.0;

  double g_total(const LossWeights& w) const { return w.gan * g_gan_loss + w.perceptual * g_perc_loss; }
  bool operator==(const LossRecord&) const = default;
};

std::ostream& operator<<(std::ostream& os, const LossRecord& r);

/// Raised when a loss goes non-finite; carries the offending step's record.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, LossRecord record)
      : Error(ErrorCode::kNonFiniteLoss, what), record_(record) {}
  const LossRecord& record() const { return record_; }

 private:
  LossRecord record_;
};

struct PairedDataset {
  ClassPalette palette;
  std::vector<stain::PatchPair> pairs;

  /// Loads every record of the split; labels are validated against the palette.
  static PairedDataset from_manifest(const DatasetManifest& manifest, Split split, const ClassPalette& palette);
};

/// Owns generator, discriminators, feature extractor, both optimizers and the data RNG.
/// One step(): power iteration on every spectral norm, a discriminator update on the
/// least-squares loss, then a generator update on gan * lsgan_g + perceptual * L1 features.
class GanTrainer {
 public:
  GanTrainer(TrainConfig cfg, ClassPalette palette);
  static GanTrainer from_checkpoint(const Container& c);

  GanTrainer(GanTrainer&&) = default;
  GanTrainer& operator=(GanTrainer&&) = default;

  LossRecord step(const std::vector<stain::PatchPair>& batch, const std::vector<LatentVector>& latents);
  /// Draws a batch (with replacement), augmentations and latents from the trainer's RNG.
  LossRecord step(const PairedDataset& data);

  /// The two halves of step(). The discriminator half sees the fake detached; the generator
  /// half freezes the discriminator. Non-finite losses skip the update and are returned as-is.
  double update_discriminator(const torch::Tensor& onehot, const torch::Tensor& real, const torch::Tensor& fake,
                              double lr);
  std::pair<double, double> update_generator(const torch::Tensor& onehot, const torch::Tensor& real,
                                             const torch::Tensor& fake, double lr);

  Container checkpoint() const;

  std::int64_t iteration() const { return iteration_; }
  const TrainConfig& config() const { return cfg_; }
  const ClassPalette& palette() const { return palette_; }
  net::Generator& generator() { return g_; }
  net::MultiScaleDiscriminator& discriminator() { return d_; }
  FeatureExtractor& extractor() { return phi_; }
  Rng& rng() { return rng_; }

 private:
  TrainConfig cfg_;
  ClassPalette palette_;
  Rng rng_;
  net::Generator g_{nullptr};
  net::MultiScaleDiscriminator d_{nullptr};
  FeatureExtractor phi_{nullptr};
  std::unique_ptr<Adam> opt_g_;
  std::unique_ptr<Adam> opt_d_;
  std::int64_t iteration_ = 0;
};

struct RunOptions {
  std::filesystem::path out_dir;     // empty: nothing written
  std::int64_t until = -1;           // target iteration; -1 means config().iterations
  bool write_samples = true;
  std::function<void(const LossRecord&)> on_step;
};

struct TrainResult {
  std::vector<LossRecord> log;
  std::filesystem::path final_checkpoint;
};

/// Steps the trainer up to the target iteration, writing periodic checkpoints and sample grids.
TrainResult train(GanTrainer& trainer, const PairedDataset& data, const RunOptions& opts = {});

/// Loss log: header "iteration,lr,d_loss,g_gan_loss,g_perc_loss" then one row per iteration.
std::string loss_log_csv(const std::vector<LossRecord>& log, bool header = true);

/// Rows = the first four label maps of the dataset, columns = label rendering + four fixed latents.
ByteImage sample_grid(GanTrainer& trainer, const PairedDataset& data);

/// Inference-only model restored from a GAN checkpoint.
struct SynthesisModel {
  net::Generator generator{nullptr};
  ClassPalette palette;
  TrainConfig config;
  std::int64_t iteration = 0;
};

SynthesisModel load_synthesis_model(const std::filesystem::path& checkpoint);

}  // namespace histosynth::train
