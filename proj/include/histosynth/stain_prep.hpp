#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "histosynth/data_model.hpp"
#include "histosynth/rng.hpp"

namespace histosynth::stain {

/// Rows are unit optical-density vectors for hematoxylin, eosin and a residual stain.
class StainMatrix {
 public:
  explicit StainMatrix(const Eigen::Matrix3d& rows);

  /// Ruifrok & Johnston H&E vectors; the residual row is the normalized cross product.
  static StainMatrix ruifrok_he();

  const Eigen::Matrix3d& rows() const { return rows_; }
  /// Maps an OD triple to stain concentrations: solves M^T c = od.
  const Eigen::Matrix3d& unmixing() const { return unmixing_; }

 private:
  Eigen::Matrix3d rows_;
  Eigen::Matrix3d unmixing_;
};

/// H x W x C interleaved real image.
struct RealImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<double> data;

  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

  /// Single-channel view copied out of channel c.
  RealImage channel(int c) const;
};

/// H x W 0/1 mask.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;

  BinaryMask() = default;
  BinaryMask(int width, int height, std::uint8_t fill = 0)
      : width(width), height(height), values(static_cast<std::size_t>(width) * height, fill) {}

  std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const BinaryMask&) const = default;
};

/// OD = -log10(max(I, 1) / 255) per channel.
double optical_density(std::uint8_t intensity);
RealImage rgb_to_od(const ByteImage& img);

RealImage deconvolve(const RealImage& od, const StainMatrix& m);
/// Inverse of deconvolve: od = M^T c.
RealImage compose(const RealImage& concentrations, const StainMatrix& m);

struct ThresholdMethod {
  /// Unset selects Otsu's threshold.
  std::optional<double> fixed;
};

/// Otsu threshold over a 256-bin histogram spanning [min, max] of the channel.
double otsu_threshold(const RealImage& channel);
BinaryMask threshold(const RealImage& channel, ThresholdMethod method = {});

/// 3x3 median with edge replication.
BinaryMask median_filter3(const BinaryMask& mask);

struct NucleiOptions {
  StainMatrix stains = StainMatrix::ruifrok_he();
  ThresholdMethod threshold;
  int nuclei_class = 2;
};

BinaryMask nuclei_mask(const ByteImage& img, const NucleiOptions& opts = {});
/// Overlays the nuclei class onto a 2-class map, producing a 3-class map.
LabelMap derive_nuclei_class(const ByteImage& img, const LabelMap& two_class, const NucleiOptions& opts = {});
LabelMap overlay_class(const LabelMap& base, const BinaryMask& mask, int cls);

struct PatchPair {
  ByteImage image;
  LabelMap label;
};

std::vector<PatchPair> extract_patches(const PatchPair& pair, int size, int stride);

/// Element of the dihedral group of the square: rotate by 90*k degrees (counter-clockwise)
/// then optionally mirror left-right.
struct Transform {
  int quarter_turns = 0;
  bool flip = false;

  bool operator==(const Transform&) const = default;
};

Transform random_transform(Rng& rng);
Transform inverse(Transform t);
PatchPair apply(const PatchPair& pair, Transform t);
PatchPair augment(const PatchPair& pair, Rng& rng);

}  // namespace histosynth::stain
