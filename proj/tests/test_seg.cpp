#include "histosynth/checkpoint.hpp"
#include "histosynth/procedural.hpp"
#include "histosynth/seg_eval.hpp"
#include "support.hpp"

using namespace histosynth;
using namespace histosynth::seg;
using testing::error_code;

namespace {
SegConfig small(int crop = 16, std::uint64_t seed = 1) {
  SegConfig c;
  c.num_classes = 3;
  c.base_features = 4;
  c.crop_size = crop;
  c.batch_size = 2;
  c.seed = seed;
  c.iterations = 3;
  return c;
}

std::vector<stain::PatchPair> blobs(int n, int size = 16) {
  procedural::BlobOptions o;
  o.size = size;
  return procedural::make_blob_dataset(42, n, o);
}
}  // namespace

TEST_SUITE("seg_model") {
  TEST_CASE("crop size must be divisible by 8") {
    auto c = small(20);
    CHECK(error_code([&] { c.validate(); }) == ErrorCode::kConfig);
    CHECK(error_code([&] { SegTrainer{c}; }) == ErrorCode::kConfig);
  }

  TEST_CASE("output keeps the input size with K channels; bridge at 1/8") {
    SegConfig c = small(256);
    c.num_classes = 4;
    Rng rng(1);
    SegNet net(c, rng);
    std::vector<std::int64_t> trace;
    torch::NoGradGuard g;
    const auto y = net->forward(torch::zeros({1, 3, 256, 256}), net::Mode::kInfer, &trace);
    CHECK(y.sizes() == torch::IntArrayRef({1, 4, 256, 256}));
    REQUIRE(trace.size() == 2);
    CHECK(trace[0] == 32);
    CHECK(trace[1] == 4 * 8);
  }

  TEST_CASE("feature counts double per level at the default width") {
    SegConfig c;
    c.num_classes = 4;
    Rng rng(2);
    SegNet net(c, rng);
    CHECK(net->down[0]->conv->weight.size(0) == 64);
    CHECK(net->down[1]->conv->weight.size(0) == 128);
    CHECK(net->down[2]->conv->weight.size(0) == 256);
    CHECK(net->bridge->conv->weight.size(0) == 512);
    CHECK(net->head->weight.size(0) == 4);
  }

  TEST_CASE("argmax picks the largest channel and breaks ties low") {
    auto logits = torch::zeros({3, 2, 2});
    logits[2].fill_(1.0);
    for (auto v : argmax_labels(logits).values) CHECK(v == 2);
    auto tie = torch::zeros({3, 1, 2});
    tie[1][0][0] = 5.0;
    tie[2][0][0] = 5.0;
    const auto m = argmax_labels(tie);
    CHECK(m.values[0] == 1);
    CHECK(m.values[1] == 0);
  }

  TEST_CASE("predict keeps dimensions and rejects sizes not divisible by 8") {
    Rng rng(3);
    SegNet net(small(), rng);
    const auto m = predict(net, ByteImage(24, 16), 3);
    CHECK(m.width == 24);
    CHECK(m.height == 16);
    CHECK(predict(net, ByteImage(24, 16, 9), 3) == predict(net, ByteImage(24, 16, 9), 3));
    CHECK(error_code([&] { predict(net, ByteImage(20, 16), 3); }) == ErrorCode::kShape);
  }
}

TEST_SUITE("seg_training") {
  TEST_CASE("zero iterations return the initialization") {
    auto c = small();
    c.iterations = 0;
    SegTrainer a(c), b(c);
    const auto res = train_seg(a, blobs(4));
    CHECK(res.losses.empty());
    CHECK(parameter_hash(*a.model()) == parameter_hash(*b.model()));
  }

  TEST_CASE("fixed seed gives identical weights") {
    SegTrainer a(small()), b(small());
    const auto data = blobs(4);
    CHECK(train_seg(a, data).losses == train_seg(b, data).losses);
    CHECK(parameter_hash(*a.model()) == parameter_hash(*b.model()));
  }

  TEST_CASE("classes missing from the training labels are reported") {
    std::vector<stain::PatchPair> data{{ByteImage(16, 16, 200), LabelMap(16, 16, 3, 0)}};
    data[0].label.at(3, 3) = 2;
    SegTrainer t(small());
    const auto res = train_seg(t, data);
    CHECK(res.absent_classes == std::vector<int>{1});
  }

  TEST_CASE("crops larger than the patches are rejected") {
    SegTrainer t(small(32));
    CHECK(error_code([&] { t.step(blobs(2)); }) == ErrorCode::kPatchTooLarge);
  }

  TEST_CASE("memorizes a single image") {
    auto c = small(16, 9);
    c.batch_size = 1;
    c.base_features = 8;
    c.iterations = 500;
    c.schedule.base = 1e-3;
    SegTrainer t(c);
    const auto data = blobs(1);
    const auto res = train_seg(t, data);
    CHECK(res.losses.back() < 0.05);
  }

  TEST_CASE("checkpoint round trip and resume") {
    const auto data = blobs(4);
    auto c = small();
    c.iterations = 4;
    SegTrainer full(c);
    const auto ref = train_seg(full, data).losses;
    SegTrainer part(c);
    auto losses = train_seg(part, data, 2).losses;
    auto resumed = SegTrainer::from_checkpoint(deserialize(serialize(part.checkpoint())));
    const auto rest = train_seg(resumed, data).losses;
    losses.insert(losses.end(), rest.begin(), rest.end());
    CHECK(losses == ref);

    testing::TempDir dir("seg");
    write_checkpoint(dir / "seg.hsck", full.checkpoint());
    SegConfig loaded_cfg;
    auto model = load_seg_model(dir / "seg.hsck", &loaded_cfg);
    CHECK(loaded_cfg.to_json() == c.to_json());
    CHECK(predict(model, data[0].image, 3) == predict(full.model(), data[0].image, 3));
  }

  TEST_CASE("evaluation of a model against its own predictions is perfect") {
    SegTrainer t(small());
    auto data = blobs(3);
    for (auto& p : data) p.label = predict(t.model(), p.image, 3);
    const auto m = evaluate_model(t.model(), data, 3);
    CHECK(m.mpa == 1.0);
    CHECK(m.miou == 1.0);
  }
}

TEST_SUITE("procedural") {
  TEST_CASE("blob pairs are deterministic, sized and use all classes") {
    const auto a = procedural::make_blob_dataset(3, 5), b = procedural::make_blob_dataset(3, 5);
    REQUIRE(a.size() == 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].image == b[i].image);
      CHECK(a[i].label == b[i].label);
      CHECK(a[i].image.width == 64);
      CHECK(is_valid(a[i].label));
    }
    std::vector<int> counts(3, 0);
    for (const auto& p : a)
      for (auto v : p.label.values) ++counts[v];
    for (int c : counts) CHECK(c > 0);
    CHECK(counts[0] > counts[1]);
    // Pair i does not depend on how many pairs are requested.
    CHECK(procedural::make_blob_dataset(3, 2)[1].image == a[1].image);
    CHECK(procedural::blob_palette().size() == 3);
  }
}
