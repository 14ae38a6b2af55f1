#pragma once

#include <string>
#include <vector>

#include "histosynth/data_model.hpp"
#include "histosynth/networks.hpp"
#include "histosynth/rng.hpp"

namespace histosynth::latent {

/// 256 i.i.d. standard-normal draws rounded to float.
LatentVector sample_latent(Rng& rng);

/// Latent of a seed: the first kLatentDim normals of Rng(seed). The service and the CLI use
/// this mapping, so (label map, seed) always reproduces the same image.
LatentVector latent_from_seed(std::uint64_t seed);

/// (1 - t) * a + t * b in double precision, rounded to float; t must lie in [0, 1].
LatentVector lerp(const LatentVector& a, const LatentVector& b, double t);

/// Frames for t = i / (steps - 1); every frame is generated on its own from the same label map.
std::vector<NormImage> interpolation_sequence(net::Generator& g, const LabelMap& m, const LatentVector& a,
                                              const LatentVector& b, int steps);

struct LatentSet {
  std::string tag;
  std::vector<LatentVector> latents;
};

using Direction = std::vector<double>;

/// mean(target) - mean(source), componentwise in double precision.
Direction class_direction(const LatentSet& source, const LatentSet& target);

/// z + alpha * d, rounded to float.
LatentVector apply_direction(const LatentVector& z, const Direction& d, double alpha);

}  // namespace histosynth::latent
