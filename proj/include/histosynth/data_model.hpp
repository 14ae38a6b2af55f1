#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace histosynth {

inline constexpr int kLatentDim = 256;

struct ClassInfo {
  int index = 0;
  std::string name;
  std::array<std::uint8_t, 3> display_rgb{0, 0, 0};

  bool operator==(const ClassInfo&) const = default;
};

/// Ordered class metadata; indices are exactly 0..K-1, names are unique, K >= 2.
class ClassPalette {
 public:
  ClassPalette() = default;
  explicit ClassPalette(std::vector<ClassInfo> classes);

  int size() const { return static_cast<int>(classes_.size()); }
  const std::vector<ClassInfo>& classes() const { return classes_; }
  const ClassInfo& operator[](int k) const { return classes_.at(k); }

  /// Copy with one extra class appended at index K.
  ClassPalette with_class(std::string name, std::array<std::uint8_t, 3> rgb) const;

  bool operator==(const ClassPalette&) const = default;

 private:
  std::vector<ClassInfo> classes_;
};

/// H x W map of class indices, stored row-major as single-channel bytes.
struct LabelMap {
  int width = 0;
  int height = 0;
  int num_classes = 2;
  std::vector<std::uint8_t> values;

  LabelMap() = default;
  LabelMap(int width, int height, int num_classes, std::uint8_t fill = 0);

  std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixel_count() const { return values.size(); }

  bool operator==(const LabelMap&) const = default;
};

/// Throws kInvalidLabel naming the first offending value if any value >= num_classes.
void validate(const LabelMap& m);
bool is_valid(const LabelMap& m) noexcept;

/// H x W x 3 interleaved 8-bit image.
struct ByteImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  ByteImage() = default;
  ByteImage(int width, int height, std::uint8_t fill = 0);

  std::uint8_t& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  const std::uint8_t& at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool operator==(const ByteImage&) const = default;
};

/// H x W x 3 interleaved real image with values in [-1, 1].
struct NormImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  bool operator==(const NormImage&) const = default;
};

/// Latent code: exactly kLatentDim finite components.
class LatentVector {
 public:
  LatentVector() : values_(kLatentDim, 0.0f) {}
  explicit LatentVector(std::vector<float> values);

  std::span<const float> values() const { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  bool operator==(const LatentVector&) const = default;

 private:
  std::vector<float> values_;
};

enum class Split { kTrain, kTest };

struct ManifestRecord {
  std::filesystem::path image;
  std::filesystem::path label;
  Split split = Split::kTrain;

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  std::vector<ManifestRecord> select(Split split) const;
};

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// K x H x W 0/1 volume, channel-major.
std::vector<std::uint8_t> one_hot_encode(const LabelMap& m, int num_classes);

float normalize_value(std::uint8_t v);
std::uint8_t denormalize_value(float x);
NormImage normalize(const ByteImage& img);
ByteImage denormalize(const NormImage& img);

}  // namespace histosynth
