#include "histosynth/latent.hpp"
#include "support.hpp"
#include "tiny.hpp"

using namespace histosynth;
using namespace histosynth::latent;
using testing::error_code;

namespace {
LatentVector constant(float v) { return LatentVector(std::vector<float>(kLatentDim, v)); }
}  // namespace

TEST_SUITE("latent") {
  TEST_CASE("sampling: length, determinism and moments") {
    Rng a(5), b(5);
    const auto z = sample_latent(a);
    CHECK(z.size() == 256);
    CHECK(z == sample_latent(b));
    CHECK(latent_from_seed(7) == latent_from_seed(7));
    CHECK_FALSE(latent_from_seed(7) == latent_from_seed(8));

    Rng rng(11);
    std::vector<double> sum(256, 0.0), sq(256, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto s = sample_latent(rng);
      for (int k = 0; k < 256; ++k) sum[k] += s[k], sq[k] += static_cast<double>(s[k]) * s[k];
    }
    for (int k = 0; k < 256; k += 17) {
      const double mean = sum[k] / n, var = sq[k] / n - mean * mean;
      CHECK(std::abs(mean) < 0.02);
      CHECK(var > 0.97);
      CHECK(var < 1.03);
    }
  }

  TEST_CASE("lerp endpoints, midpoint and range") {
    const auto a = latent_from_seed(1), b = latent_from_seed(2);
    CHECK(lerp(a, b, 0.0) == a);
    CHECK(lerp(a, b, 1.0) == b);
    CHECK(lerp(constant(0.0f), constant(2.0f), 0.5) == constant(1.0f));
    CHECK(error_code([&] { lerp(a, b, 1.5); }) == ErrorCode::kRange);
    CHECK(error_code([&] { lerp(a, b, -0.1); }) == ErrorCode::kRange);
  }

  TEST_CASE("lerp symmetry") {
    const auto a = constant(0.75f), b = constant(-3.5f);
    for (double t : {0.0, 0.125, 0.25, 0.5, 0.75, 1.0}) CHECK(lerp(a, b, t) == lerp(b, a, 1.0 - t));
    const auto x = latent_from_seed(3), y = latent_from_seed(4);
    // dyadic weights, so 1 - (1 - t) == t and both sides round the same products
    for (double t : {0.125, 0.375, 0.8125}) {
      CHECK(lerp(x, y, t) == lerp(y, x, 1.0 - t));
    }
  }

  TEST_CASE("class direction arithmetic") {
    const auto z1 = latent_from_seed(1), z2 = latent_from_seed(2);
    const LatentSet s{"moderate", {z1}}, t{"poor", {z2}};
    const auto d = class_direction(s, t);
    CHECK(apply_direction(z1, d, 1.0) == z2);
    CHECK(apply_direction(z1, d, 0.0) == z1);
    const auto zero = class_direction(s, s);
    for (double v : zero) CHECK(v == 0.0);
    CHECK(apply_direction(z2, zero, 3.0) == z2);
    CHECK(error_code([&] { class_direction(LatentSet{"empty", {}}, t); }) == ErrorCode::kEmptySet);
  }

  TEST_CASE("apply then unapply") {
    const auto z = constant(0.5f);
    const Direction d(256, 0.25);
    CHECK(apply_direction(apply_direction(z, d, 2.0), d, -2.0) == z);
    const auto r = latent_from_seed(6);
    const auto dir = class_direction(LatentSet{"a", {latent_from_seed(7)}}, LatentSet{"b", {latent_from_seed(8)}});
    const auto back = apply_direction(apply_direction(r, dir, 0.7), dir, -0.7);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(std::abs(back[i] - r[i]) <= 1e-5f);
  }

  TEST_CASE("interpolation frames reuse the label map and match direct generation at the ends") {
    auto cfg = testing::tiny_config();
    Rng rng(cfg.seed);
    net::Generator g(cfg.generator, rng);
    const auto data = testing::tiny_data(1);
    const auto& m = data.pairs[0].label;
    const auto a = latent_from_seed(10), b = latent_from_seed(11);
    const auto two = interpolation_sequence(g, m, a, b, 2);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == net::generate(g, m, a));
    CHECK(two[1] == net::generate(g, m, b));
    const auto five = interpolation_sequence(g, m, a, b, 5);
    REQUIRE(five.size() == 5);
    CHECK(five[2] == net::generate(g, m, lerp(a, b, 0.5)));
    CHECK(five.front() == two.front());
    CHECK(error_code([&] { interpolation_sequence(g, m, a, b, 1); }) == ErrorCode::kRange);
  }
}
