#include "histosynth/procedural.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace histosynth::procedural {

namespace {
constexpr std::array<std::array<double, 3>, 3> kBase{{
    {232.0, 170.0, 200.0},  // stroma: pale pink
    {170.0, 90.0, 160.0},   // gland: magenta-purple
    {60.0, 40.0, 120.0},    // nuclei: dark blue
}};
}  // namespace

ClassPalette blob_palette() {
  return ClassPalette({{0, "stroma", {232, 170, 200}}, {1, "gland", {170, 90, 160}}, {2, "nuclei", {60, 40, 120}}});
}

stain::PatchPair make_blob_pair(Rng& rng, const BlobOptions& opts) {
  const int n = opts.size;
  LabelMap label(n, n, 3);
  auto paint_ellipse = [&](double cx, double cy, double rx, double ry, double angle, std::uint8_t cls) {
    const double c = std::cos(angle), s = std::sin(angle);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double u = (c * dx + s * dy) / rx, v = (-s * dx + c * dy) / ry;
        if (u * u + v * v <= 1.0) label.at(y, x) = cls;
      }
  };
  const int glands = opts.min_glands + static_cast<int>(rng.uniform_int(opts.max_glands - opts.min_glands + 1));
  for (int i = 0; i < glands; ++i)
    paint_ellipse(rng.uniform(0, n), rng.uniform(0, n), rng.uniform(0.12, 0.25) * n, rng.uniform(0.08, 0.18) * n,
                  rng.uniform(0, 3.14159265358979), 1);
  const int nuclei = opts.min_nuclei + static_cast<int>(rng.uniform_int(opts.max_nuclei - opts.min_nuclei + 1));
  for (int i = 0; i < nuclei; ++i) {
    const double r = rng.uniform(0.03, 0.06) * n;
    paint_ellipse(rng.uniform(0, n), rng.uniform(0, n), r, r * rng.uniform(0.7, 1.0), rng.uniform(0, 3.14159265358979), 2);
  }

  // Low-frequency shading: a random plane wave per image.
  const double kx = rng.uniform(-0.2, 0.2), ky = rng.uniform(-0.2, 0.2), phase = rng.uniform(0, 6.283185307);
  const double shade_amp = rng.uniform(4.0, 12.0);
  ByteImage image(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const auto& base = kBase[label.at(y, x)];
      const double shade = shade_amp * std::sin(kx * x + ky * y + phase);
      const double grain = opts.noise * rng.normal();
      for (int ch = 0; ch < 3; ++ch) {
        const double v = base[ch] + shade + grain + 0.35 * opts.noise * rng.normal();
        image.at(y, x, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  return {std::move(image), std::move(label)};
}

std::vector<stain::PatchPair> make_blob_dataset(std::uint64_t seed, int count, const BlobOptions& opts) {
  std::vector<stain::PatchPair> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
    out.push_back(make_blob_pair(rng, opts));
  }
  return out;
}

}  // namespace histosynth::procedural
