// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <CLI11.hpp>
#include <torch/torch.h>

#include <Eigen/SVD>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unistd.h>

#include "gradcheck.hpp"
#include "histosynth/checkpoint.hpp"
#include "histosynth/concordance.hpp"
#include "histosynth/image_io.hpp"
#include "histosynth/latent.hpp"
#include "histosynth/networks.hpp"
#include "histosynth/objectives.hpp"
#include "histosynth/procedural.hpp"
#include "histosynth/seg_eval.hpp"
#include "histosynth/seg_metrics.hpp"
#include "histosynth/stain_prep.hpp"
#include "histosynth/training.hpp"
#include "oracles.hpp"

using namespace histosynth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  /// Records a failed check; the first few reasons end up in the report line.
  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass || failures < 3) detail << (detail.tellp() > 0 ? "; " : "") << "FAILED " << what;
    pass = false;
    ++failures;
  }
  void note(const std::string& s) { detail << (detail.tellp() > 0 ? "; " : "") << s; }

  int failures = 0;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<void(Outcome&)> run;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

LabelMap random_map(Rng& rng, int w, int h, int k) {
  LabelMap m(w, h, k);
  for (auto& v : m.values) v = static_cast<std::uint8_t>(rng.uniform_int(k));
  return m;
}

torch::Tensor randn(Rng& rng, std::vector<std::int64_t> shape) {
  auto t = torch::empty(shape, torch::kDouble);
  auto* p = t.data_ptr<double>();
  for (std::int64_t i = 0; i < t.numel(); ++i) p[i] = rng.normal();
  return t;
}

torch::Tensor random_onehot(Rng& rng, int b, int k, int h, int w) {
  std::vector<LabelMap> maps;
  for (int i = 0; i < b; ++i) maps.push_back(random_map(rng, w, h, k));
  return net::one_hot(maps, k);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1 ------------------------------------------------------------------------
void metric_oracle(Outcome& o) {
  Rng rng(101);
  double worst = 0.0;
  int compared = 0;
  for (int k : {2, 3, 10}) {
    for (int trial = 0; trial < 200; ++trial) {
      const auto truth = random_map(rng, 32, 32, k), pred = random_map(rng, 32, 32, k);
      for (int c = 0; c < k; ++c) {
        const auto counts = metrics::confusion(pred, truth, c);
        const auto ref = oracle::count_pixels(pred, truth, c);
        worst = std::max(worst, std::abs(metrics::pixel_accuracy(counts) - oracle::pixel_accuracy(ref)));
        if (ref.tp + ref.fp + ref.fn > 0) {
          const auto r = metrics::iou(counts);
          o.require(!r.absent, "IOU flagged absent for a present class");
          worst = std::max(worst, std::abs(r.value - oracle::iou(ref)));
        }
        ++compared;
      }
    }
  }
  o.require(worst <= 1e-12, "max deviation " + fmt(worst));
  o.note(std::to_string(compared) + " class comparisons, max deviation " + fmt(worst));
}

// 2 ------------------------------------------------------------------------
void kappa_oracle(Outcome& o) {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int cats = 2 + static_cast<int>(rng.uniform_int(4));
    const int n = 20 + static_cast<int>(rng.uniform_int(200));
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.uniform_int(cats));
      b[i] = rng.uniform() < 0.5 ? a[i] : static_cast<int>(rng.uniform_int(cats));
    }
    const auto r = stats::cohen_kappa(a, b, cats);
    const auto ref = oracle::cohen(a, b, cats);
    worst = std::max({worst, std::abs(r.kappa - ref.kappa), std::abs(r.std_error - ref.se)});

    const int raters = 3 + static_cast<int>(rng.uniform_int(5));
    stats::RatingTable t{cats, std::vector<std::vector<int>>(n, std::vector<int>(raters))};
    for (auto& row : t.ratings) {
      const int lean = static_cast<int>(rng.uniform_int(cats));
      for (auto& v : row) v = rng.uniform() < 0.4 ? lean : static_cast<int>(rng.uniform_int(cats));
    }
    const auto f = stats::fleiss_kappa(t);
    const auto fref = oracle::fleiss(t.ratings, cats);
    worst = std::max({worst, std::abs(f.kappa - fref.kappa), std::abs(f.std_error - fref.se)});
  }
  o.require(worst <= 1e-12, "max deviation " + fmt(worst));

  std::vector<int> same(60);
  for (std::size_t i = 0; i < same.size(); ++i) same[i] = static_cast<int>(i % 4);
  o.require(stats::cohen_kappa(same, same, 4).kappa == 1.0, "Cohen perfect agreement != 1");
  stats::RatingTable perfect{4, {}};
  for (int i = 0; i < 40; ++i) perfect.ratings.push_back(std::vector<int>(5, i % 4));
  o.require(stats::fleiss_kappa(perfect).kappa == 1.0, "Fleiss perfect agreement != 1");

  const int big = 100000;
  std::vector<int> a(big), b(big);
  stats::RatingTable indep{3, std::vector<std::vector<int>>(big, std::vector<int>(4))};
  for (int i = 0; i < big; ++i) {
    a[i] = static_cast<int>(rng.uniform_int(3));
    b[i] = static_cast<int>(rng.uniform_int(3));
    for (auto& v : indep.ratings[i]) v = static_cast<int>(rng.uniform_int(3));
  }
  const double kc = stats::cohen_kappa(a, b, 3).kappa, kf = stats::fleiss_kappa(indep).kappa;
  o.require(std::abs(kc) < 0.02, "independent Cohen " + fmt(kc));
  o.require(std::abs(kf) < 0.02, "independent Fleiss " + fmt(kf));
  o.note("max deviation " + fmt(worst) + ", independent kappa " + fmt(kc) + " / " + fmt(kf));
}

// 3 ------------------------------------------------------------------------
void deconvolution(Outcome& o) {
  Rng rng(303);
  const auto he = stain::StainMatrix::ruifrok_he();
  stain::RealImage conc{64, 64, 3, {}};
  for (int i = 0; i < 64 * 64 * 3; ++i) conc.data.push_back(rng.uniform(0.0, 3.0));
  const auto back = stain::deconvolve(stain::compose(conc, he), he);
  double worst = 0.0;
  for (std::size_t i = 0; i < conc.data.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - conc.data[i]));
  o.require(worst <= 1e-9, "round trip error " + fmt(worst));

  double leak = 0.0;
  for (int s = 0; s < 2; ++s) {
    const Eigen::Vector3d v = he.rows().row(s).transpose();
    for (int trial = 0; trial < 200; ++trial) {
      const double c = rng.uniform(0.05, 3.0);
      stain::RealImage od{1, 1, 3, {c * v(0), c * v(1), c * v(2)}};
      const auto got = stain::deconvolve(od, he);
      for (int ch = 0; ch < 3; ++ch)
        if (ch != s) leak = std::max(leak, std::abs(got.data[ch]) / c);
    }
  }
  o.require(leak < 0.01, "cross-channel leakage " + fmt(leak));
  o.note("round trip error " + fmt(worst) + ", max leakage " + fmt(leak));
}

// 4 ------------------------------------------------------------------------
void median_filter(Outcome& o) {
  Rng rng(404);
  int mismatched = 0;
  for (int trial = 0; trial < 100; ++trial) {
    stain::BinaryMask m(64, 64);
    const double density = rng.uniform(0.1, 0.9);
    for (auto& v : m.values) v = rng.uniform() < density ? 1 : 0;
    if (!(stain::median_filter3(m) == oracle::median3(m))) ++mismatched;
  }
  o.require(mismatched == 0, std::to_string(mismatched) + " masks differ from the sort oracle");
  o.note("100 masks, " + std::to_string(mismatched) + " mismatches");
}

// 5 ------------------------------------------------------------------------
void spectral(Outcome& o) {
  Rng rng(505);
  constexpr int kIterations = 500;
  double lo = 1e9, hi = -1e9;
  for (int trial = 0; trial < 50; ++trial) {
    const auto rows = 2 + rng.uniform_int(63), cols = 2 + rng.uniform_int(63);
    const auto w = randn(rng, {rows, cols}) * rng.uniform(0.1, 10.0);
    auto state = net::make_spectral_state(rows, rng, torch::kDouble);
    const auto wn = net::spectral_normalize(w, state, kIterations).contiguous();
    Eigen::MatrixXd m(rows, cols);
    for (std::int64_t i = 0; i < rows; ++i)
      for (std::int64_t j = 0; j < cols; ++j) m(i, j) = wn[i][j].item<double>();
    const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
    lo = std::min(lo, sigma);
    hi = std::max(hi, sigma);
  }
  o.require(lo >= 0.999 && hi <= 1.001, "top singular values in [" + fmt(lo, 8) + ", " + fmt(hi, 8) + "]");
  o.note(std::to_string(kIterations) + " power iterations, max |sigma - 1| " +
         fmt(std::max(std::abs(lo - 1.0), std::abs(hi - 1.0))));
}

// 6 ------------------------------------------------------------------------
void gradients(Outcome& o) {
  Rng rng(606);
  double worst = 0.0;
  auto track = [&](const std::string& what, double err) {
    worst = std::max(worst, err);
    o.require(err < 1e-4, what + " relative error " + fmt(err));
  };

  net::SpadeNorm spade(net::SpadeOptions{3, 3, 6, true}, rng);
  spade->to(torch::kDouble);
  net::power_iterate_all(*spade, 3);
  auto x = randn(rng, {2, 3, 4, 4}).requires_grad_(true);
  auto oh = random_onehot(rng, 2, 3, 8, 8).to(torch::kDouble);
  auto probe = randn(rng, {2, 3, 4, 4});
  auto f_spade = [&] { return (spade->forward(x, oh, net::Mode::kTrain) * probe).sum(); };
  track("spade_normalize/x", testing::max_grad_error(f_spade, x, rng, 48));
  for (auto* p : {&spade->shared->weight, &spade->gamma->weight, &spade->beta->weight, &spade->gamma->bias})
    track("spade_normalize/params", testing::max_grad_error(f_spade, *p, rng, 24));

  net::SpadeResBlock block(4, 3, 2, 5, true, rng);
  block->to(torch::kDouble);
  net::power_iterate_all(*block, 3);
  auto xb = randn(rng, {2, 4, 4, 4}).requires_grad_(true);
  auto ohb = random_onehot(rng, 2, 2, 4, 4).to(torch::kDouble);
  auto probe_b = randn(rng, {2, 3, 4, 4});
  auto f_block = [&] { return (block->forward(xb, ohb, net::Mode::kTrain) * probe_b).sum(); };
  track("spade_residual_block/x", testing::max_grad_error(f_block, xb, rng, 48));
  for (auto* p : {&block->conv_0->weight, &block->conv_1->weight, &block->skip_conv->weight,
                  &block->norm_0->shared->weight, &block->norm_1->beta->weight})
    track("spade_residual_block/params", testing::max_grad_error(f_block, *p, rng, 24));

  auto r0 = randn(rng, {2, 1, 4, 4}).requires_grad_(true), r1 = randn(rng, {2, 1, 2, 2}).requires_grad_(true);
  auto f0 = randn(rng, {2, 1, 4, 4}).requires_grad_(true), f1 = randn(rng, {2, 1, 2, 2}).requires_grad_(true);
  auto d_loss = [&] { return lsgan_d_loss(std::vector{r0, r1}, std::vector{f0, f1}); };
  auto g_loss = [&] { return lsgan_g_loss(std::vector{f0, f1}); };
  for (auto* p : {&r0, &r1, &f0, &f1}) track("lsgan_d", testing::max_grad_error(d_loss, *p, rng, 40));
  for (auto* p : {&f0, &f1}) track("lsgan_g", testing::max_grad_error(g_loss, *p, rng, 40));

  ExtractorConfig ecfg;
  ecfg.widths = {4, 6, 6};
  FeatureExtractor phi(ecfg);
  phi->to(torch::kDouble);
  auto fake = randn(rng, {1, 3, 8, 8}).requires_grad_(true);
  const auto real = randn(rng, {1, 3, 8, 8});
  auto perc = [&] { return perceptual_loss(fake, real, phi); };
  track("perceptual", testing::max_grad_error(perc, fake, rng, 64));
  o.note("max relative error " + fmt(worst));
}

// 7 ------------------------------------------------------------------------
void architecture(Outcome& o) {
  Rng rng(707);
  torch::NoGradGuard guard;
  for (int r : {16, 64, 256, 512}) {
    net::GeneratorConfig cfg;
    cfg.resolution = r;
    cfg.num_classes = 3;
    net::Generator g(cfg, rng);
    const int expected = static_cast<int>(std::lround(std::log2(r / 4.0)));
    const std::string at = "R=" + std::to_string(r) + ": ";
    o.require(g->upsample_count() == expected, at + "upsample stages " + std::to_string(g->upsample_count()));
    o.require(g->dense->weight.size(1) == 256 && g->dense->weight.size(0) == 16384,
              at + "dense layer " + std::to_string(g->dense->weight.size(1)) + "->" +
                  std::to_string(g->dense->weight.size(0)));
    std::vector<std::int64_t> trace;
    auto z = randn(rng, {1, 256}).to(torch::kFloat) * 3.0;
    const auto out = g->forward(z, random_onehot(rng, 1, 3, r, r), net::Mode::kInfer, &trace);
    // reshape to (1024, 4, 4): the first stage receives 4x4 maps with base_channels features
    o.require(cfg.base_channels == 1024 && !trace.empty() && trace.front() == 4, at + "reshape is not 1024x4x4");
    std::vector<std::int64_t> sizes;
    for (int s = 0; s <= expected; ++s) sizes.push_back(4LL << s);
    o.require(trace == sizes, at + "stage sizes do not double from 4 to R");
    o.require(out.sizes() == torch::IntArrayRef({1, 3, r, r}), at + "output shape");
    o.require(out.abs().max().item<double>() <= 1.0, at + "output exceeds [-1, 1]");
  }
  seg::SegConfig scfg;
  seg::SegNet s(scfg, rng);
  const auto logits = s->forward(randn(rng, {1, 3, 256, 256}).to(torch::kFloat).tanh(), net::Mode::kInfer);
  o.require(logits.sizes() == torch::IntArrayRef({1, scfg.num_classes, 256, 256}), "segmentation output shape");
  o.note("R in {16, 64, 256, 512} checked; segmentation 3x256x256 -> " + std::to_string(scfg.num_classes) +
         "x256x256");
}

// 8 ------------------------------------------------------------------------
void schedule(Outcome& o) {
  const LrSchedule s;
  o.require(lr_at(0, s) == 2e-4, "lr_at(0) = " + fmt(lr_at(0, s), 17));
  o.require(lr_at(999, s) == 2e-4, "lr_at(999) = " + fmt(lr_at(999, s), 17));
  o.require(lr_at(1000, s) == 2e-4 * 0.95, "lr_at(1000) = " + fmt(lr_at(1000, s), 17));
  o.require(lr_at(2000, s) == 1.805e-4, "lr_at(2000) = " + fmt(lr_at(2000, s), 17));
  o.note("lr_at(2000) = " + fmt(lr_at(2000, s), 17));
}

// 9 ------------------------------------------------------------------------
void desk_scale(Outcome& o, const fs::path& out) {
  constexpr std::uint64_t kTrainSeed = 100, kTestSeed = 200, kLatentSeed = 77;
  auto cfg = train::desk_preset(3);
  cfg.iterations = 2000;
  cfg.seed = 1;
  train::PairedDataset data{procedural::blob_palette(), procedural::make_blob_dataset(kTrainSeed, 500)};
  const auto test = procedural::make_blob_dataset(kTestSeed, 100);

  train::GanTrainer trainer(cfg, data.palette);
  train::RunOptions run;
  run.out_dir = out.empty() ? fs::path() : out / "gan";
  const auto result = train::train(trainer, data, run);
  if (!out.empty()) {
    std::ofstream(out / "gan" / "loss_log.csv") << train::loss_log_csv(result.log);
  }

  // (a)
  std::vector<double> early, late;
  for (const auto& r : result.log) {
    if (r.iteration < 500) early.push_back(r.g_total(cfg.weights));
    if (r.iteration >= 1500) late.push_back(r.g_total(cfg.weights));
  }
  const double m_early = median(early), m_late = median(late);
  o.require(m_late < m_early, "(a) median G loss late " + fmt(m_late) + " >= early " + fmt(m_early));

  // (b) and the synthetic training set for (c)
  Rng latents(kLatentSeed);
  double sum[3][3] = {}, count[3] = {};
  std::vector<stain::PatchPair> synth;
  for (const auto& p : data.pairs) {
    const auto img = net::generate(trainer.generator(), p.label, latent::sample_latent(latents));
    for (std::size_t i = 0; i < p.label.values.size(); ++i) {
      const int c = p.label.values[i];
      count[c] += 1;
      for (int ch = 0; ch < 3; ++ch) sum[c][ch] += img.data[i * 3 + ch];
    }
    synth.push_back({denormalize(img), p.label});
  }
  double separation = 1e9;
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      double d2 = 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        const double diff = sum[a][ch] / count[a] - sum[b][ch] / count[b];
        d2 += diff * diff;
      }
      separation = std::min(separation, std::sqrt(d2));
    }
  o.require(separation >= 0.2, "(b) min class colour separation " + fmt(separation));

  // (c)
  auto scfg = seg::desk_preset(3);
  scfg.iterations = 2000;
  scfg.seed = 3;
  seg::SegTrainer seg_trainer(scfg);
  seg::train_seg(seg_trainer, synth);
  const auto m = seg::evaluate_model(seg_trainer.model(), test, 3);
  metrics::MetricAccumulator majority(3);
  for (const auto& p : test) majority.add(LabelMap(p.label.width, p.label.height, 3, 0), p.label);
  const double baseline = majority.finish().miou;
  o.require(m.miou >= 0.5, "(c) mIOU " + fmt(m.miou));

  o.note("(a) median G loss " + fmt(m_early) + " -> " + fmt(m_late) + ", (b) min separation " + fmt(separation) +
         ", (c) mIOU " + fmt(m.miou) + " vs majority baseline " + fmt(baseline));
  if (!out.empty()) {
    io::write_png(out / "synth_example.png", synth.front().image);
    write_checkpoint(out / "seg.hsck", seg_trainer.checkpoint());
    std::ofstream(out / "summary.json") << nlohmann::json{{"median_g_early", m_early},
                                                          {"median_g_late", m_late},
                                                          {"min_class_separation", separation},
                                                          {"miou", m.miou},
                                                          {"mpa", m.mpa},
                                                          {"majority_baseline_miou", baseline}}
                                               .dump(2)
                                        << "\n";
  }
}

// 10 -----------------------------------------------------------------------
train::TrainConfig small_config() {
  train::TrainConfig c;
  c.generator.resolution = 32;
  c.generator.num_classes = 3;
  c.generator.base_channels = 16;
  c.generator.channel_schedule = {16, 16, 8};
  c.generator.spade_hidden = 8;
  c.discriminator.num_classes = 3;
  c.discriminator.channels = {8, 16, 16};
  c.extractor.widths = {8, 8};
  c.batch_size = 4;
  c.iterations = 12;
  c.seed = 10;
  return c;
}

void determinism(Outcome& o) {
  procedural::BlobOptions bo;
  bo.size = 32;
  const train::PairedDataset data{procedural::blob_palette(), procedural::make_blob_dataset(9, 40, bo)};
  const auto cfg = small_config();

  train::GanTrainer a(cfg, data.palette), b(cfg, data.palette);
  const auto trace_a = train::train(a, data).log;
  const auto trace_b = train::train(b, data).log;
  o.require(trace_a == trace_b, "two fixed-seed runs differ");

  const fs::path dir = fs::temp_directory_path() / ("histosynth_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  train::GanTrainer first(cfg, data.palette);
  train::RunOptions half;
  half.until = cfg.iterations / 2;
  auto resumed_log = train::train(first, data, half).log;
  write_checkpoint(dir / "half.hsck", first.checkpoint());
  auto second = train::GanTrainer::from_checkpoint(read_checkpoint(dir / "half.hsck"));
  const auto rest = train::train(second, data).log;
  resumed_log.insert(resumed_log.end(), rest.begin(), rest.end());
  o.require(resumed_log == trace_a, "resumed trace differs from the uninterrupted run");

  write_checkpoint(dir / "final.hsck", a.checkpoint());
  auto loaded = train::load_synthesis_model(dir / "final.hsck");
  int differing = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto z = latent::latent_from_seed(i);
    const auto& m = data.pairs[i].label;
    const auto x = io::encode_png(denormalize(net::generate(a.generator(), m, z)));
    const auto y = io::encode_png(denormalize(net::generate(loaded.generator, m, z)));
    if (x != y) ++differing;
  }
  o.require(differing == 0, std::to_string(differing) + " images differ after save/load");
  fs::remove_all(dir);
  o.note(std::to_string(trace_a.size()) + "-step traces identical; resume at " + std::to_string(half.until) +
         "; 6 images byte-identical after reload");
}

// 11 -----------------------------------------------------------------------
void latent_ops(Outcome& o) {
  Rng rng(1111);
  int bad_lerp = 0, bad_direction = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = latent::sample_latent(rng), b = latent::sample_latent(rng);
    if (!(latent::lerp(a, b, 0.0) == a) || !(latent::lerp(a, b, 1.0) == b)) ++bad_lerp;
    const auto d = latent::class_direction({"source", {a}}, {"target", {b}});
    if (!(latent::apply_direction(a, d, 1.0) == b)) ++bad_direction;
  }
  o.require(bad_lerp == 0, std::to_string(bad_lerp) + " lerp endpoints inexact");
  o.require(bad_direction == 0, std::to_string(bad_direction) + " singleton directions inexact");

  auto cfg = small_config();
  Rng init(cfg.seed);
  net::Generator g(cfg.generator, init);
  const auto labels = random_map(rng, 32, 32, 3);
  const auto a = latent::sample_latent(rng), b = latent::sample_latent(rng);
  const auto frames = latent::interpolation_sequence(g, labels, a, b, 5);
  int mismatched = 0;
  for (int i = 0; i < 5; ++i) {
    const auto ref = net::generate(g, labels, latent::lerp(a, b, i / 4.0));
    if (!(frames[i].data == ref.data)) ++mismatched;
  }
  o.require(frames.size() == 5 && mismatched == 0, "interpolation frames are not renders of the shared label map");
  o.require(frames.front().data == net::generate(g, labels, a).data && frames.back().data == net::generate(g, labels, b).data,
            "interpolation endpoints differ from the endpoint latents");
  o.note("200 latent pairs exact; 5 frames rendered from one label map");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histosynth acceptance criteria"};
  std::vector<int> skip, only;
  fs::path out;
  app.add_option("--skip", skip, "Criteria to skip");
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--out", out, "Artifact directory for the desk-scale run");
  CLI11_PARSE(app, argc, argv);
  torch::set_num_threads(1);

  const std::vector<Criterion> criteria{
      {1, "metric oracle equivalence", 10, metric_oracle},
      {2, "kappa oracle equivalence", 30, kappa_oracle},
      {3, "deconvolution round trip", 5, deconvolution},
      {4, "median filter oracle", 10, median_filter},
      {5, "spectral normalization", 10, spectral},
      {6, "gradient correctness", 120, gradients},
      {7, "architecture shape law", 0, architecture},
      {8, "schedule law", 0, schedule},
      {9, "desk-scale end-to-end", 6 * 3600, [&](Outcome& o) { desk_scale(o, out); }},
      {10, "determinism and resume", 0, determinism},
      {11, "latent ops", 0, latent_ops},
  };

  if (!out.empty()) fs::create_directories(out);
  int failed = 0;
  for (const auto& c : criteria) {
    const std::set<int> skipped(skip.begin(), skip.end()), selected(only.begin(), only.end());
    if (skipped.count(c.id) || (!selected.empty() && !selected.count(c.id))) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0) o.require(secs < c.budget_seconds, "runtime " + fmt(secs) + " s over budget");
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << c.id << "  " << c.name << " ("
              << std::fixed << std::setprecision(2) << secs << " s): " << std::defaultfloat << o.detail.str()
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
