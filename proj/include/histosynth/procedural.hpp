#pragma once

#include <cstdint>
#include <vector>

#include "histosynth/data_model.hpp"
#include "histosynth/rng.hpp"
#include "histosynth/stain_prep.hpp"

namespace histosynth::procedural {

/// Three-class synthetic tissue: 0 stroma (background), 1 gland blobs, 2 nuclei dots.
/// Each class is painted with its own base colour plus per-pixel and low-frequency noise.
struct BlobOptions {
  int size = 64;
  int min_glands = 1;
  int max_glands = 3;
  int min_nuclei = 4;
  int max_nuclei = 10;
  double noise = 18.0;
};

ClassPalette blob_palette();

stain::PatchPair make_blob_pair(Rng& rng, const BlobOptions& opts = {});

/// Pair i is drawn from Rng::derive(seed, i), so subsets are stable under count changes.
std::vector<stain::PatchPair> make_blob_dataset(std::uint64_t seed, int count, const BlobOptions& opts = {});

}  // namespace histosynth::procedural
