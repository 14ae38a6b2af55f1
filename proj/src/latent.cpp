#include "histosynth/latent.hpp"

#include "histosynth/error.hpp"

namespace histosynth::latent {

LatentVector sample_latent(Rng& rng) {
  std::vector<float> z(kLatentDim);
  for (auto& v : z) v = static_cast<float>(rng.normal());
  return LatentVector(std::move(z));
}

LatentVector latent_from_seed(std::uint64_t seed) {
  Rng rng(seed);
  return sample_latent(rng);
}

LatentVector lerp(const LatentVector& a, const LatentVector& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::kRange, "interpolation weight must lie in [0, 1]");
  std::vector<float> out(a.size());
  const double s = 1.0 - t;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(s * static_cast<double>(a[i]) + t * static_cast<double>(b[i]));
  return LatentVector(std::move(out));
}

std::vector<NormImage> interpolation_sequence(net::Generator& g, const LabelMap& m, const LatentVector& a,
                                              const LatentVector& b, int steps) {
  if (steps < 2) throw Error(ErrorCode::kRange, "an interpolation needs at least 2 steps");
  std::vector<NormImage> frames;
  frames.reserve(steps);
  for (int i = 0; i < steps; ++i) {
    // Exact endpoints: t is 0 and 1 at i = 0 and i = steps - 1.
    const double t = static_cast<double>(i) / (steps - 1);
    frames.push_back(net::generate(g, m, lerp(a, b, t)));
  }
  return frames;
}

namespace {

std::vector<double> mean_of(const LatentSet& s) {
  if (s.latents.empty()) throw Error(ErrorCode::kEmptySet, "latent set '" + s.tag + "' is empty");
  std::vector<double> mean(kLatentDim, 0.0);
  for (const auto& z : s.latents)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += z[i];
  for (auto& v : mean) v /= static_cast<double>(s.latents.size());
  return mean;
}

}  // namespace

Direction class_direction(const LatentSet& source, const LatentSet& target) {
  const auto from = mean_of(source);
  const auto to = mean_of(target);
  Direction d(kLatentDim);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = to[i] - from[i];
  return d;
}

LatentVector apply_direction(const LatentVector& z, const Direction& d, double alpha) {
  if (d.size() != z.size()) throw Error(ErrorCode::kShape, "direction length does not match the latent");
  std::vector<float> out(z.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(static_cast<double>(z[i]) + alpha * d[i]);
  return LatentVector(std::move(out));
}

}  // namespace histosynth::latent
