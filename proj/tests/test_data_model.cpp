#include <cmath>
#include <limits>

#include "histosynth/image_io.hpp"
#include "support.hpp"

using namespace histosynth;
using testing::error_code;

TEST_SUITE("data_model") {
  TEST_CASE("one-hot of a single pixel") {
    LabelMap m(1, 1, 2, 1);
    const auto v = one_hot_encode(m, 2);
    REQUIRE(v.size() == 2);
    CHECK(v[0] == 0);
    CHECK(v[1] == 1);
  }

  TEST_CASE("one-hot is a partition and argmax recovers the map") {
    Rng rng(11);
    const auto m = testing::random_map(rng, 16, 16, 4);
    const auto v = one_hot_encode(m, 4);
    const std::size_t plane = m.pixel_count();
    for (std::size_t i = 0; i < plane; ++i) {
      int sum = 0, best = -1;
      for (int k = 0; k < 4; ++k) {
        sum += v[k * plane + i];
        if (v[k * plane + i] == 1) best = k;
      }
      CHECK(sum == 1);
      CHECK(best == m.values[i]);
    }
  }

  TEST_CASE("label value >= K is rejected with its location") {
    LabelMap m(3, 2, 3);
    m.at(1, 2) = 3;
    CHECK(error_code([&] { one_hot_encode(m, 3); }) == ErrorCode::kInvalidLabel);
    CHECK_FALSE(is_valid(m));
    try {
      validate(m);
    } catch (const Error& e) {
      const std::string what = e.what();
      CHECK(what.find('3') != std::string::npos);
    }
    m.at(1, 2) = 2;
    CHECK(is_valid(m));
  }

  TEST_CASE("normalize endpoints and exhaustive byte round trip") {
    CHECK(normalize_value(0) == -1.0f);
    CHECK(normalize_value(255) == 1.0f);
    for (int v = 0; v < 256; ++v) CHECK(denormalize_value(normalize_value(static_cast<std::uint8_t>(v))) == v);
    CHECK(denormalize_value(3.0f) == 255);
    CHECK(denormalize_value(-7.0f) == 0);
  }

  TEST_CASE("normalize is strictly monotone") {
    for (int v = 1; v < 256; ++v)
      CHECK(normalize_value(static_cast<std::uint8_t>(v)) > normalize_value(static_cast<std::uint8_t>(v - 1)));
  }

  TEST_CASE("image normalize round trip") {
    Rng rng(3);
    const auto img = testing::random_image(rng, 7, 5);
    const auto n = normalize(img);
    for (float x : n.data) CHECK((x >= -1.0f && x <= 1.0f));
    CHECK(denormalize(n) == img);
  }

  TEST_CASE("palette invariants") {
    CHECK_NOTHROW(ClassPalette({{0, "a", {}}, {1, "b", {}}}));
    CHECK(error_code([] { ClassPalette({{0, "a", {}}}); }) == ErrorCode::kConfig);
    CHECK(error_code([] { ClassPalette({{0, "a", {}}, {2, "b", {}}}); }) == ErrorCode::kConfig);
    CHECK(error_code([] { ClassPalette({{0, "a", {}}, {1, "a", {}}}); }) == ErrorCode::kConfig);
    const ClassPalette p({{0, "a", {1, 2, 3}}, {1, "b", {4, 5, 6}}});
    const auto q = p.with_class("nuclei", {7, 8, 9});
    CHECK(q.size() == 3);
    CHECK(q[2].index == 2);
    CHECK(q[2].name == "nuclei");
  }

  TEST_CASE("latent vector length and finiteness") {
    CHECK(LatentVector().size() == 256);
    CHECK(error_code([] { LatentVector(std::vector<float>(255, 0.0f)); }) == ErrorCode::kShape);
    std::vector<float> bad(256, 0.0f);
    bad[17] = std::numeric_limits<float>::quiet_NaN();
    CHECK(error_code([&] { LatentVector{bad}; }).has_value());
    bad[17] = std::numeric_limits<float>::infinity();
    CHECK(error_code([&] { LatentVector{bad}; }).has_value());
  }
}

TEST_SUITE("image_io") {
  TEST_CASE("png round trips are lossless") {
    Rng rng(5);
    const auto img = testing::random_image(rng, 13, 9);
    CHECK(io::decode_rgb_png(io::encode_png(img)) == img);
    const auto m = testing::random_map(rng, 31, 17, 10);
    CHECK(io::decode_label_png(io::encode_png(m), 10) == m);
  }

  TEST_CASE("all-zero label map encodes to a valid png") {
    LabelMap m(8, 8, 3, 0);
    const auto bytes = io::encode_png(m);
    REQUIRE(bytes.size() > 8);
    CHECK(bytes[1] == 'P');
    CHECK(io::decode_label_png(bytes, 3) == m);
  }

  TEST_CASE("garbage png bytes raise an io error") {
    std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
    CHECK(error_code([&] { io::decode_rgb_png(junk); }) == ErrorCode::kIo);
  }

  TEST_CASE("palette json round trip") {
    const ClassPalette p({{0, "stroma", {230, 170, 200}}, {1, "gland", {170, 90, 160}}});
    CHECK(io::palette_from_json(io::palette_to_json(p)) == p);
  }

  TEST_CASE("manifest round trip resolves relative paths") {
    testing::TempDir dir("manifest");
    Rng rng(1);
    io::write_png(dir / "a.png", testing::random_image(rng, 4, 4));
    io::write_png(dir / "a_label.png", LabelMap(4, 4, 2));
    DatasetManifest m;
    m.records.push_back({"a.png", "a_label.png", Split::kTest});
    io::write_manifest(dir / "manifest.jsonl", m);
    const auto back = io::read_manifest(dir / "manifest.jsonl");
    REQUIRE(back.records.size() == 1);
    CHECK(back.records[0].split == Split::kTest);
    CHECK(back.records[0].image == dir / "a.png");
    CHECK_NOTHROW(io::check_manifest(back));
    CHECK(back.select(Split::kTrain).empty());

    io::write_png(dir / "a_label.png", LabelMap(5, 4, 2));
    CHECK(error_code([&] { io::check_manifest(back); }).has_value());
  }

  TEST_CASE("contact sheet tiles left to right, top to bottom") {
    std::vector<ByteImage> tiles;
    for (int i = 0; i < 3; ++i) tiles.emplace_back(2, 2, static_cast<std::uint8_t>(10 * (i + 1)));
    const auto sheet = io::contact_sheet(tiles, 2);
    CHECK(sheet.width == 4);
    CHECK(sheet.height == 4);
    CHECK(sheet.at(0, 0, 0) == 10);
    CHECK(sheet.at(0, 2, 0) == 20);
    CHECK(sheet.at(2, 0, 0) == 30);
  }
}
