// histosynth: command line entry points for every pipeline stage.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "histosynth/checkpoint.hpp"
#include "histosynth/concordance.hpp"
#include "histosynth/dataset.hpp"
#include "histosynth/image_io.hpp"
#include "histosynth/latent.hpp"
#include "histosynth/procedural.hpp"
#include "histosynth/seg_eval.hpp"
#include "histosynth/seg_metrics.hpp"
#include "histosynth/service.hpp"
#include "histosynth/stain_prep.hpp"
#include "histosynth/training.hpp"

namespace fs = std::filesystem;
using namespace histosynth;
using nlohmann::json;

namespace {

/// Exit with a message; caught in main.
struct Exit {
  int code;
  std::string message;
};

std::string zero_pad(std::int64_t v, int width) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << v;
  return os.str();
}

std::string read_text(const fs::path& p) {
  const auto b = io::read_file(p);
  return {b.begin(), b.end()};
}

void write_text(const fs::path& p, const std::string& s) { io::write_file(p, {s.begin(), s.end()}); }

ClassPalette generic_palette(int k) {
  std::vector<ClassInfo> classes;
  for (int i = 0; i < k; ++i) {
    const auto g = static_cast<std::uint8_t>(k == 1 ? 0 : 255 * i / (k - 1));
    classes.push_back({i, "class_" + std::to_string(i), {g, g, g}});
  }
  return ClassPalette(std::move(classes));
}

// --- prep -----------------------------------------------------------------

struct PrepArgs {
  fs::path in, out;
  int size = 512, stride = 512;
  bool add_nuclei = false;
  double test_fraction = 0.0;
  std::uint64_t seed = 0;
};

int cmd_prep(const PrepArgs& a) {
  const auto scan = dataset::scan_sources(a.in);
  if (!scan.unpaired.empty()) {
    std::ostringstream os;
    os << scan.unpaired.size() << " unpaired file(s):";
    for (const auto& p : scan.unpaired) os << "\n  " << p.string();
    throw Exit{1, os.str()};
  }
  if (scan.pairs.empty()) throw Exit{2, "no pairs found in " + a.in.string()};

  ClassPalette palette;
  const bool has_palette = fs::exists(a.in / dataset::kPaletteName);
  std::vector<stain::PatchPair> sources;
  int max_label = 0;
  for (const auto& [image, label] : scan.pairs) {
    stain::PatchPair p{io::read_rgb_png(image), io::read_label_png(label, 256)};
    if (p.image.width != p.label.width || p.image.height != p.label.height)
      throw Error(ErrorCode::kAlignment, image.string() + " and " + label.string() + " differ in size");
    for (auto v : p.label.values) max_label = std::max<int>(max_label, v);
    sources.push_back(std::move(p));
  }
  palette = has_palette ? io::read_palette(a.in / dataset::kPaletteName) : generic_palette(std::max(2, max_label + 1));
  for (auto& s : sources) {
    s.label.num_classes = palette.size();
    validate(s.label);
  }
  if (a.add_nuclei) {
    if (palette.size() != 2) throw Error(ErrorCode::kConfig, "--add-nuclei needs a 2-class dataset");
    stain::NucleiOptions opts;
    opts.nuclei_class = 2;
    for (auto& s : sources) s.label = stain::derive_nuclei_class(s.image, s.label, opts);
    palette = palette.with_class("nuclei", {60, 40, 120});
  }

  // split by source image so patches of one slide never straddle train and test
  std::vector<std::size_t> order(sources.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(a.seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto n_test = static_cast<std::size_t>(std::llround(a.test_fraction * static_cast<double>(sources.size())));
  std::vector<bool> is_test(sources.size(), false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

  std::vector<dataset::NamedPair> out;
  int n_train = 0, n_test_patches = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto stem = scan.pairs[i].first.stem().string();
    const auto patches = stain::extract_patches(sources[i], a.size, a.stride);
    for (std::size_t j = 0; j < patches.size(); ++j) {
      const auto split = is_test[i] ? Split::kTest : Split::kTrain;
      (split == Split::kTest ? n_test_patches : n_train) += 1;
      out.push_back({stem + "_" + zero_pad(static_cast<std::int64_t>(j), 4), patches[j], split});
    }
  }
  const auto manifest = dataset::write_dataset(a.out, palette, out);
  std::cout << "sources " << sources.size() << "\npatches " << out.size() << " (train " << n_train << ", test "
            << n_test_patches << ")\nclasses " << palette.size() << "\nmanifest " << manifest.string() << "\n";
  return 0;
}

// --- make-blobs -----------------------------------------------------------

int cmd_make_blobs(const fs::path& out, int train_count, int test_count, int size, std::uint64_t seed) {
  procedural::BlobOptions opts;
  opts.size = size;
  std::vector<dataset::NamedPair> pairs;
  const auto train = procedural::make_blob_dataset(seed, train_count, opts);
  const auto test = procedural::make_blob_dataset(seed + 1, test_count, opts);
  for (std::size_t i = 0; i < train.size(); ++i) pairs.push_back({"train_" + zero_pad(i, 5), train[i], Split::kTrain});
  for (std::size_t i = 0; i < test.size(); ++i) pairs.push_back({"test_" + zero_pad(i, 5), test[i], Split::kTest});
  const auto manifest = dataset::write_dataset(out, procedural::blob_palette(), pairs);
  std::cout << "pairs " << pairs.size() << " (train " << train.size() << ", test " << test.size() << ")\nmanifest "
            << manifest.string() << "\n";
  return 0;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  fs::path data, out, config, resume, vgg_weights;
  std::string preset = "desk";
  std::int64_t iterations = -1, checkpoint_interval = -1;
  int batch = 0;
  std::uint64_t seed = 0;
  bool seed_given = false, no_samples = false;
};

int cmd_train(const TrainArgs& a) {
  const auto data = dataset::load_split(a.data, Split::kTrain);
  if (data.pairs.empty()) throw Exit{1, "no training pairs in " + a.data.string()};
  fs::create_directories(a.out);

  std::optional<train::GanTrainer> trainer;
  if (!a.resume.empty()) {
    trainer.emplace(train::GanTrainer::from_checkpoint(read_checkpoint(a.resume)));
    std::cout << "resumed at iteration " << trainer->iteration() << "\n";
  } else {
    train::TrainConfig cfg;
    if (!a.config.empty()) {
      cfg = train::TrainConfig::from_json(json::parse(read_text(a.config)));
    } else if (a.preset == "desk") {
      cfg = train::desk_preset(data.palette.size());
    } else {
      cfg.generator.num_classes = cfg.discriminator.num_classes = data.palette.size();
    }
    if (a.config.empty()) cfg.generator.resolution = data.pairs.front().image.width;
    if (a.iterations >= 0) cfg.iterations = a.iterations;
    if (a.checkpoint_interval >= 0) cfg.checkpoint_interval = a.checkpoint_interval;
    if (a.batch > 0) cfg.batch_size = a.batch;
    if (a.seed_given) cfg.seed = a.seed;
    if (!a.vgg_weights.empty()) {
      cfg.extractor.kind = "vgg19";
      cfg.extractor.weights = a.vgg_weights;
    }
    trainer.emplace(cfg, data.palette);
  }
  write_text(a.out / "config.json", trainer->config().to_json().dump(2) + "\n");

  train::RunOptions opts;
  opts.out_dir = a.out;
  opts.write_samples = !a.no_samples;
  opts.until = !a.resume.empty() && a.iterations >= 0 ? a.iterations : -1;
  opts.on_step = [](const train::LossRecord& r) {
    if (r.iteration % 100 == 0)
      std::cout << "iter " << r.iteration << " lr " << r.lr << " d " << r.d_loss << " g_gan " << r.g_gan_loss
                << " g_perc " << r.g_perc_loss << std::endl;
  };
  const auto result = train::train(*trainer, data, opts);

  const auto log_path = a.out / "loss_log.csv";
  const bool append = !a.resume.empty() && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  log << train::loss_log_csv(result.log, !append);
  std::cout << "final checkpoint " << result.final_checkpoint.string() << "\n";
  return 0;
}

// --- train-seg / eval-seg ------------------------------------------------

struct SegArgs {
  fs::path data, out, resume;
  std::string preset = "desk";
  std::int64_t iterations = -1;
  int crop = 0, features = 0, batch = 0;
  std::uint64_t seed = 0;
};

int cmd_train_seg(const SegArgs& a) {
  const auto data = dataset::load_split(a.data, Split::kTrain);
  if (data.pairs.empty()) throw Exit{1, "no training pairs in " + a.data.string()};
  std::optional<seg::SegTrainer> trainer;
  if (!a.resume.empty()) {
    trainer.emplace(seg::SegTrainer::from_checkpoint(read_checkpoint(a.resume)));
  } else {
    seg::SegConfig cfg = a.preset == "desk" ? seg::desk_preset(data.palette.size()) : seg::SegConfig{};
    cfg.num_classes = data.palette.size();
    if (a.crop > 0) cfg.crop_size = a.crop;
    if (a.features > 0) cfg.base_features = a.features;
    if (a.batch > 0) cfg.batch_size = a.batch;
    if (a.iterations >= 0) cfg.iterations = a.iterations;
    cfg.seed = a.seed;
    trainer.emplace(cfg);
  }
  const auto until = !a.resume.empty() && a.iterations >= 0 ? a.iterations : -1;
  const auto result = seg::train_seg(*trainer, data.pairs, until);
  for (int c : result.absent_classes)
    std::cerr << "warning: class " << c << " (" << data.palette[c].name << ") never occurs in the training labels\n";
  fs::create_directories(a.out);
  write_checkpoint(a.out / "seg.hsck", trainer->checkpoint());
  std::ofstream log(a.out / "seg_loss.csv");
  log << "iteration,loss\n";
  const auto first = trainer->iteration() - static_cast<std::int64_t>(result.losses.size());
  for (std::size_t i = 0; i < result.losses.size(); ++i)
    log << first + static_cast<std::int64_t>(i) << "," << std::setprecision(17) << result.losses[i] << "\n";
  std::cout << "iterations " << trainer->iteration() << "\ncheckpoint " << (a.out / "seg.hsck").string() << "\n";
  return 0;
}

int cmd_eval_seg(const fs::path& model_path, const fs::path& pred_dir, const fs::path& data_path, const std::string& split,
                 const fs::path& json_out) {
  const auto data = dataset::load_split(data_path, split_from_string(split));
  if (data.pairs.empty()) throw Exit{1, "no " + split + " pairs in " + data_path.string()};
  const int k = data.palette.size();
  std::vector<LabelMap> preds, truths;
  const auto manifest = fs::is_directory(data_path) ? data_path / dataset::kManifestName : data_path;
  const auto records = io::read_manifest(manifest).select(split_from_string(split));
  if (!pred_dir.empty()) {
    for (const auto& r : records) {
      const auto pred = pred_dir / r.label.filename();
      if (!fs::exists(pred)) throw Exit{1, "missing prediction " + pred.string()};
      preds.push_back(io::read_label_png(pred, k));
    }
  } else {
    seg::SegConfig cfg;
    auto model = seg::load_seg_model(model_path, &cfg);
    if (cfg.num_classes != k) throw Error(ErrorCode::kConfig, "model and dataset class counts differ");
    for (const auto& p : data.pairs) preds.push_back(seg::predict(model, p.image, k));
  }
  for (const auto& p : data.pairs) truths.push_back(p.label);
  const auto m = metrics::evaluate(preds, truths, k);
  std::vector<std::string> names;
  for (const auto& c : data.palette.classes()) names.push_back(c.name);
  std::cout << metrics::format_report(m, names);
  if (!json_out.empty()) {
    json per = json::array();
    for (const auto& c : m.per_class)
      per.push_back({{"class", c.cls}, {"name", names[c.cls]}, {"pa", c.pa}, {"iou", c.iou}, {"absent", c.absent}});
    write_text(json_out, json{{"mpa", m.mpa}, {"miou", m.miou}, {"per_class", per}}.dump(2) + "\n");
  }
  return 0;
}

// --- stats ----------------------------------------------------------------

int cmd_stats(const fs::path& detections, const fs::path& ratings, const fs::path& reference,
              const std::vector<std::string>& categories) {
  if (detections.empty() && ratings.empty() && reference.empty())
    throw Exit{1, "give at least one of --detections, --ratings, --reference"};
  std::vector<std::pair<std::string, stats::DetectionOutcome>> det;
  if (!detections.empty()) det = stats::parse_detections(read_text(detections));
  std::optional<stats::RatingFile> rated, ref;
  if (!ratings.empty()) rated = stats::parse_ratings(read_text(ratings), categories);
  if (!reference.empty()) ref = stats::parse_ratings(read_text(reference), categories);
  std::cout << stats::format_report(stats::agreement_report(det, rated, ref));
  return 0;
}

// --- synth / interpolate --------------------------------------------------

LabelMap read_labels_for(const train::SynthesisModel& m, const fs::path& path) {
  auto labels = io::read_label_png(path, m.palette.size());
  validate(labels);
  const int r = m.config.generator.resolution;
  if (labels.width != r || labels.height != r)
    throw Error(ErrorCode::kShape, "label map is " + std::to_string(labels.width) + "x" + std::to_string(labels.height) +
                                       ", model expects " + std::to_string(r) + "x" + std::to_string(r));
  return labels;
}

int cmd_synth(const fs::path& model_path, const fs::path& labels_path, std::uint64_t seed, const fs::path& out) {
  auto m = train::load_synthesis_model(model_path);
  const auto labels = read_labels_for(m, labels_path);
  io::write_png(out, denormalize(net::generate(m.generator, labels, latent::latent_from_seed(seed))));
  std::cout << out.string() << "\n";
  return 0;
}

int cmd_synth_dataset(const fs::path& model_path, const fs::path& data_path, const fs::path& out, std::uint64_t seed) {
  auto m = train::load_synthesis_model(model_path);
  const auto data = dataset::load_split(data_path, Split::kTrain);
  std::vector<dataset::NamedPair> pairs;
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    Rng rng = Rng::derive(seed, i);
    const auto& labels = data.pairs[i].label;
    auto image = denormalize(net::generate(m.generator, labels, latent::sample_latent(rng)));
    pairs.push_back({"synth_" + zero_pad(static_cast<std::int64_t>(i), 5), {std::move(image), labels}, Split::kTrain});
  }
  const auto manifest = dataset::write_dataset(out, m.palette, pairs);
  std::cout << "pairs " << pairs.size() << "\nmanifest " << manifest.string() << "\n";
  return 0;
}

int cmd_interpolate(const fs::path& model_path, const fs::path& labels_path, std::uint64_t seed_a, std::uint64_t seed_b,
                    int steps, const fs::path& out) {
  auto m = train::load_synthesis_model(model_path);
  const auto labels = read_labels_for(m, labels_path);
  const auto frames = latent::interpolation_sequence(m.generator, labels, latent::latent_from_seed(seed_a),
                                                     latent::latent_from_seed(seed_b), steps);
  fs::create_directories(out);
  std::vector<ByteImage> tiles;
  const int width = std::max(3, static_cast<int>(std::to_string(steps - 1).size()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    tiles.push_back(denormalize(frames[i]));
    io::write_png(out / ("frame_" + zero_pad(static_cast<std::int64_t>(i), width) + ".png"), tiles.back());
  }
  io::write_png(out / "contact_sheet.png", io::contact_sheet(tiles, std::min(steps, 8)));
  std::cout << "frames " << frames.size() << "\n";
  return 0;
}

// --- serve ----------------------------------------------------------------

int cmd_serve(service::ServiceConfig cfg, const fs::path& checkpoint_dir) {
  auto dir = checkpoint_dir;
  if (dir.empty() && cfg.checkpoints.empty()) {
    if (const char* env = std::getenv(service::kCheckpointDirEnv)) dir = env;
  }
  if (!dir.empty()) {
    const auto found = service::discover_checkpoints(dir);
    cfg.checkpoints.insert(cfg.checkpoints.end(), found.begin(), found.end());
  }
  if (cfg.checkpoints.empty())
    throw Exit{1, std::string("no checkpoints: pass --checkpoint, --checkpoint-dir or set ") + service::kCheckpointDirEnv};
  const service::SynthesisService svc(cfg);
  svc.serve();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histosynth: label-conditioned histology image synthesis"};
  app.require_subcommand(1);
  int status = 0;

  PrepArgs prep;
  auto* p = app.add_subcommand("prep", "Tile paired images/ and labels/ into a patch dataset");
  p->add_option("input", prep.in, "Directory with images/, labels/ and optional palette.json")->required();
  p->add_option("output", prep.out, "Output dataset directory")->required();
  p->add_option("--size", prep.size, "Patch edge in pixels")->check(CLI::PositiveNumber);
  p->add_option("--stride", prep.stride, "Patch stride in pixels")->check(CLI::PositiveNumber);
  p->add_flag("--add-nuclei", prep.add_nuclei, "Derive a nuclei class from hematoxylin on 2-class labels");
  p->add_option("--test-fraction", prep.test_fraction, "Fraction of source images held out")->check(CLI::Range(0.0, 1.0));
  p->add_option("--seed", prep.seed, "Seed for the train/test assignment");
  p->callback([&] { status = cmd_prep(prep); });

  fs::path blobs_out;
  int blobs_train = 500, blobs_test = 100, blobs_size = 64;
  std::uint64_t blobs_seed = 0;
  auto* b = app.add_subcommand("make-blobs", "Write a procedural 3-class blob dataset");
  b->add_option("output", blobs_out)->required();
  b->add_option("--train", blobs_train)->check(CLI::NonNegativeNumber);
  b->add_option("--test", blobs_test)->check(CLI::NonNegativeNumber);
  b->add_option("--size", blobs_size)->check(CLI::PositiveNumber);
  b->add_option("--seed", blobs_seed, "Train pairs use this seed, test pairs seed + 1");
  b->callback([&] { status = cmd_make_blobs(blobs_out, blobs_train, blobs_test, blobs_size, blobs_seed); });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the label-conditioned GAN");
  t->add_option("--data", tr.data, "Dataset directory or manifest")->required();
  t->add_option("--out", tr.out, "Run directory for checkpoints, samples and the loss log")->required();
  t->add_option("--config", tr.config, "TrainConfig JSON; overrides --preset");
  t->add_option("--preset", tr.preset, "desk (reduced widths) or full")->check(CLI::IsMember({"desk", "full"}));
  t->add_option("--iterations", tr.iterations, "Total iterations (target iteration when resuming)");
  t->add_option("--checkpoint-interval", tr.checkpoint_interval);
  t->add_option("--batch", tr.batch);
  t->add_option("--vgg-weights", tr.vgg_weights, "VGG-19 weights exported by tools/export_vgg19.py");
  t->add_option("--resume", tr.resume, "Continue from a checkpoint");
  t->add_flag("--no-samples", tr.no_samples);
  auto* seed_opt = t->add_option("--seed", tr.seed);
  t->callback([&] {
    tr.seed_given = seed_opt->count() > 0;
    status = cmd_train(tr);
  });

  SegArgs sg;
  auto* s = app.add_subcommand("train-seg", "Train the segmentation network");
  s->add_option("--data", sg.data, "Dataset directory or manifest")->required();
  s->add_option("--out", sg.out)->required();
  s->add_option("--preset", sg.preset)->check(CLI::IsMember({"desk", "full"}));
  s->add_option("--iterations", sg.iterations);
  s->add_option("--crop", sg.crop);
  s->add_option("--features", sg.features);
  s->add_option("--batch", sg.batch);
  s->add_option("--resume", sg.resume);
  s->add_option("--seed", sg.seed);
  s->callback([&] { status = cmd_train_seg(sg); });

  fs::path ev_model, ev_pred, ev_data, ev_json;
  std::string ev_split = "test";
  std::uint64_t ev_seed = 0;
  auto* e = app.add_subcommand("eval-seg", "Per-class PA/IOU and mPA/mIOU report");
  auto* ev_m = e->add_option("--model", ev_model, "Segmentation checkpoint");
  auto* ev_p = e->add_option("--pred-dir", ev_pred, "Precomputed label PNGs named like the dataset labels");
  ev_m->excludes(ev_p);
  e->add_option("--data", ev_data)->required();
  e->add_option("--split", ev_split)->check(CLI::IsMember({"train", "test"}));
  e->add_option("--json", ev_json, "Also write the metrics as JSON");
  e->add_option("--seed", ev_seed, "Accepted for uniformity; evaluation is deterministic");
  e->callback([&] {
    if (ev_model.empty() && ev_pred.empty()) throw Exit{1, "give --model or --pred-dir"};
    status = cmd_eval_seg(ev_model, ev_pred, ev_data, ev_split, ev_json);
  });

  fs::path st_det, st_rat, st_ref;
  std::vector<std::string> st_cats;
  std::uint64_t st_seed = 0;
  auto* st = app.add_subcommand("stats", "Detection and grading agreement report");
  st->add_option("--detections", st_det, "CSV item[,rater],predicted,truth");
  st->add_option("--ratings", st_rat, "CSV item,rater,grade for the rated (synthesized) images");
  st->add_option("--reference", st_ref, "CSV item,rater,grade for the reference (real) images");
  st->add_option("--categories", st_cats, "Grade labels in category order");
  st->add_option("--seed", st_seed, "Accepted for uniformity; statistics are deterministic");
  st->callback([&] { status = cmd_stats(st_det, st_rat, st_ref, st_cats); });

  fs::path sy_model, sy_labels, sy_out;
  std::uint64_t sy_seed = 0;
  auto* sy = app.add_subcommand("synth", "Render one image from a label map");
  sy->add_option("--model", sy_model)->required();
  sy->add_option("--labels", sy_labels)->required();
  sy->add_option("--seed", sy_seed, "Latent seed");
  sy->add_option("--out", sy_out)->required();
  sy->callback([&] { status = cmd_synth(sy_model, sy_labels, sy_seed, sy_out); });

  fs::path sd_model, sd_data, sd_out;
  std::uint64_t sd_seed = 0;
  auto* sd = app.add_subcommand("synth-dataset", "Render every training label map of a dataset into a new dataset");
  sd->add_option("--model", sd_model)->required();
  sd->add_option("--data", sd_data)->required();
  sd->add_option("--out", sd_out)->required();
  sd->add_option("--seed", sd_seed, "Latent i is drawn from a stream derived from (seed, i)");
  sd->callback([&] { status = cmd_synth_dataset(sd_model, sd_data, sd_out, sd_seed); });

  fs::path in_model, in_labels, in_out;
  std::uint64_t in_a = 0, in_b = 1;
  int in_steps = 5;
  auto* in = app.add_subcommand("interpolate", "Frames along the latent segment for one label map");
  in->add_option("--model", in_model)->required();
  in->add_option("--labels", in_labels)->required();
  in->add_option("--seed", in_a, "Seed of the first latent");
  in->add_option("--seed-b", in_b, "Seed of the second latent");
  in->add_option("--steps", in_steps)->check(CLI::Range(2, 10000));
  in->add_option("--out", in_out)->required();
  in->callback([&] { status = cmd_interpolate(in_model, in_labels, in_a, in_b, in_steps, in_out); });

  service::ServiceConfig sv;
  fs::path sv_dir;
  std::vector<fs::path> sv_ckpts;
  auto* se = app.add_subcommand("serve", "HTTP synthesis service");
  se->add_option("--checkpoint", sv_ckpts, "Generator checkpoint; repeatable, id = file stem");
  se->add_option("--checkpoint-dir", sv_dir, std::string("Serve every *.hsck here; default $") + service::kCheckpointDirEnv);
  se->add_option("--host", sv.host);
  se->add_option("--port", sv.port)->check(CLI::Range(0, 65535));
  se->add_option("--max-pixels", sv.max_pixels);
  se->add_option("--max-steps", sv.max_interpolation_steps);
  se->add_option("--threads", sv.threads)->check(CLI::PositiveNumber);
  se->add_option("--seed", sv.default_seed, "Seed used when a request names no latent");
  se->callback([&] {
    sv.checkpoints = sv_ckpts;
    status = cmd_serve(sv, sv_dir);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const Exit& ex) {
    std::cerr << ex.message << "\n";
    return ex.code;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return status;
}
