#include <fstream>

#include "histosynth/checkpoint.hpp"
#include "histosynth/image_io.hpp"
#include "histosynth/latent.hpp"
#include "support.hpp"
#include "tiny.hpp"

using namespace histosynth;
using namespace histosynth::train;
using testing::error_code;

TEST_SUITE("training") {
  TEST_CASE("config validation and json round trip") {
    auto c = testing::tiny_config();
    CHECK_NOTHROW(c.validate());
    CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
    c.batch_size = 0;
    CHECK(error_code([&] { c.validate(); }) == ErrorCode::kConfig);
    c = testing::tiny_config();
    c.discriminator.num_classes = 4;
    CHECK(error_code([&] { c.validate(); }) == ErrorCode::kConfig);
  }

  TEST_CASE("palette size must match the model") {
    const ClassPalette two({{0, "a", {}}, {1, "b", {}}});
    CHECK(error_code([&] { GanTrainer(testing::tiny_config(), two); }) == ErrorCode::kConfig);
  }

  TEST_CASE("one step updates both networks") {
    auto data = testing::tiny_data();
    GanTrainer t(testing::tiny_config(), data.palette);
    const auto hg = parameter_hash(*t.generator(), false), hd = parameter_hash(*t.discriminator(), false);
    const auto rec = t.step(data);
    CHECK(rec.iteration == 0);
    CHECK(rec.lr == 2e-4);
    CHECK(t.iteration() == 1);
    CHECK(parameter_hash(*t.generator(), false) != hg);
    CHECK(parameter_hash(*t.discriminator(), false) != hd);
    CHECK(rec.d_loss >= 0.0);
    CHECK(rec.g_gan_loss >= 0.0);
    CHECK(rec.g_perc_loss >= 0.0);
  }

  TEST_CASE("each half of the step leaves the other network untouched") {
    auto data = testing::tiny_data();
    GanTrainer t(testing::tiny_config(), data.palette);
    std::vector<ByteImage> imgs;
    std::vector<LabelMap> labels;
    std::vector<LatentVector> zs;
    Rng rng(3);
    for (int i = 0; i < 2; ++i) {
      imgs.push_back(data.pairs[i].image);
      labels.push_back(data.pairs[i].label);
      zs.push_back(latent::sample_latent(rng));
    }
    const auto onehot = net::one_hot(labels, 3);
    const auto real = net::to_tensor(imgs);
    const auto fake = t.generator()->forward(net::to_tensor(zs), onehot, net::Mode::kTrain);
    const auto g0 = parameter_hash(*t.generator(), false), d0 = parameter_hash(*t.discriminator(), false);
    const auto phi0 = parameter_hash(*t.extractor());
    t.update_discriminator(onehot, real, fake, 1e-3);
    CHECK(parameter_hash(*t.generator(), false) == g0);
    const auto d1 = parameter_hash(*t.discriminator(), false);
    CHECK(d1 != d0);
    t.update_generator(onehot, real, fake, 1e-3);
    CHECK(parameter_hash(*t.discriminator(), false) == d1);
    CHECK(parameter_hash(*t.generator(), false) != g0);
    CHECK(parameter_hash(*t.extractor()) == phi0);
    for (const auto& p : t.discriminator()->parameters()) CHECK(p.requires_grad());
  }

  TEST_CASE("fixed seed gives identical loss traces") {
    auto data = testing::tiny_data();
    GanTrainer a(testing::tiny_config(7), data.palette), b(testing::tiny_config(7), data.palette);
    const auto ra = train::train(a, data), rb = train::train(b, data);
    CHECK(ra.log.size() == 6);
    CHECK(ra.log == rb.log);
    GanTrainer c(testing::tiny_config(8), data.palette);
    CHECK_FALSE(train::train(c, data).log == ra.log);
  }

  TEST_CASE("resume from a checkpoint reproduces the uninterrupted trace") {
    auto data = testing::tiny_data();
    GanTrainer full(testing::tiny_config(3), data.palette);
    const auto reference = train::train(full, data).log;

    GanTrainer first(testing::tiny_config(3), data.palette);
    RunOptions opts;
    opts.until = 3;
    auto log = train::train(first, data, opts).log;
    const auto bytes = serialize(first.checkpoint());
    auto resumed = GanTrainer::from_checkpoint(deserialize(bytes));
    CHECK(resumed.iteration() == 3);
    const auto rest = train::train(resumed, data).log;
    log.insert(log.end(), rest.begin(), rest.end());
    CHECK(log == reference);
    CHECK(parameter_hash(*resumed.generator()) == parameter_hash(*full.generator()));
  }

  TEST_CASE("zero iterations leaves the initialization in the checkpoint") {
    auto data = testing::tiny_data();
    auto cfg = testing::tiny_config(4);
    cfg.iterations = 0;
    GanTrainer t(cfg, data.palette);
    testing::TempDir dir("train0");
    RunOptions opts;
    opts.out_dir = dir.path();
    const auto res = train::train(t, data, opts);
    CHECK(res.log.empty());
    GanTrainer fresh(cfg, data.palette);
    auto model = load_synthesis_model(res.final_checkpoint);
    CHECK(parameter_hash(*model.generator) == parameter_hash(*fresh.generator()));
    CHECK(std::filesystem::exists(dir / "samples_final.png"));
  }

  TEST_CASE("periodic checkpoints, sample grid and loss log") {
    auto data = testing::tiny_data();
    auto cfg = testing::tiny_config(5);
    cfg.checkpoint_interval = 2;
    GanTrainer t(cfg, data.palette);
    testing::TempDir dir("train_ckpt");
    RunOptions opts;
    opts.out_dir = dir.path();
    const auto res = train::train(t, data, opts);
    CHECK(std::filesystem::exists(dir / "checkpoint_0000002.hsck"));
    CHECK(std::filesystem::exists(dir / "checkpoint_0000004.hsck"));
    CHECK_FALSE(std::filesystem::exists(dir / "checkpoint_0000006.hsck"));
    const auto grid = io::read_rgb_png(dir / "samples_final.png");
    CHECK(grid.width == 5 * 16);
    CHECK(grid.height == 4 * 16);
    const auto csv = loss_log_csv(res.log);
    CHECK(csv.rfind("iteration,lr,d_loss,g_gan_loss,g_perc_loss\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    // The grid uses fixed latents, so it is reproducible from the checkpoint.
    auto again = GanTrainer::from_checkpoint(read_checkpoint(res.final_checkpoint));
    CHECK(sample_grid(again, data) == grid);
  }

  TEST_CASE("empty dataset is a config error") {
    auto data = testing::tiny_data();
    GanTrainer t(testing::tiny_config(), data.palette);
    PairedDataset empty{data.palette, {}};
    CHECK(error_code([&] { train::train(t, empty); }) == ErrorCode::kConfig);
  }

  TEST_CASE("non-finite losses abort with the offending record") {
    auto data = testing::tiny_data();
    GanTrainer t(testing::tiny_config(), data.palette);
    {
      torch::NoGradGuard g;
      t.generator()->dense->bias.fill_(std::numeric_limits<float>::quiet_NaN());
    }
    try {
      t.step(data);
      FAIL("expected an abort");
    } catch (const TrainingAborted& e) {
      CHECK(e.code() == ErrorCode::kNonFiniteLoss);
      CHECK(e.record().iteration == 0);
    }
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("save, load, save is byte-identical and generation matches") {
    auto data = testing::tiny_data();
    GanTrainer t(testing::tiny_config(2), data.palette);
    train::train(t, data);
    testing::TempDir dir("ckpt");
    write_checkpoint(dir / "a.hsck", t.checkpoint());
    auto back = GanTrainer::from_checkpoint(read_checkpoint(dir / "a.hsck"));
    write_checkpoint(dir / "b.hsck", back.checkpoint());
    CHECK(io::read_file(dir / "a.hsck") == io::read_file(dir / "b.hsck"));
    const auto z = latent::latent_from_seed(9);
    const auto& m = data.pairs[0].label;
    CHECK(net::generate(t.generator(), m, z) == net::generate(back.generator(), m, z));
    auto model = load_synthesis_model(dir / "a.hsck");
    CHECK(net::generate(model.generator, m, z) == net::generate(t.generator(), m, z));
    CHECK(model.palette == data.palette);
    CHECK(model.iteration == 6);
    CHECK(back.rng().state() == t.rng().state());
  }

  TEST_CASE("truncation, bit flips, trailing bytes and version are detected") {
    Container c;
    c.put_text("meta/kind", "test");
    c.put_tensor("w", torch::arange(12, torch::kFloat).view({3, 4}));
    c.put_int("n", -5);
    const auto bytes = serialize(c);
    const auto back = deserialize(bytes);
    CHECK(back.text("meta/kind") == "test");
    CHECK(back.integer("n") == -5);
    CHECK(torch::equal(back.tensor("w"), c.tensor("w")));
    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
      std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
      CHECK(error_code([&] { deserialize(part); }) == ErrorCode::kCorruption);
    }
    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    CHECK(error_code([&] { deserialize(flipped); }) == ErrorCode::kCorruption);
    auto longer = bytes;
    longer.push_back(0);
    CHECK(error_code([&] { deserialize(longer); }) == ErrorCode::kCorruption);
    auto version = bytes;
    version[8] = 2;
    CHECK(error_code([&] { deserialize(version); }) == ErrorCode::kVersion);
  }

  TEST_CASE("header layout is little-endian and documented") {
    Container c;
    c.put_int("x", 1);
    const auto bytes = serialize(c);
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "HSYNCKPT");
    CHECK(bytes[8] == 1);
    CHECK(bytes[12] == 1);
  }

  TEST_CASE("a truncated checkpoint file does not produce a trainer") {
    auto data = testing::tiny_data();
    GanTrainer t(testing::tiny_config(), data.palette);
    testing::TempDir dir("trunc");
    write_checkpoint(dir / "x.hsck", t.checkpoint());
    auto bytes = io::read_file(dir / "x.hsck");
    bytes.resize(bytes.size() - 100);
    io::write_file(dir / "x.hsck", bytes);
    CHECK(error_code([&] { GanTrainer::from_checkpoint(read_checkpoint(dir / "x.hsck")); }) == ErrorCode::kCorruption);
  }

  TEST_CASE("loading into a mismatched module fails") {
    Rng rng(1);
    net::SNConv2d a(net::ConvSpec{2, 3, 3, 1, true, true}, rng), b(net::ConvSpec{2, 4, 3, 1, true, true}, rng);
    Container c;
    put_module(c, "m/", *a);
    CHECK(error_code([&] { load_module(c, "m/", *b); }).has_value());
  }
}
