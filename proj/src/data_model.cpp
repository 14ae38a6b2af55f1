#include "histosynth/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "histosynth/error.hpp"

namespace histosynth {

ClassPalette::ClassPalette(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
  if (classes_.size() < 2) throw Error(ErrorCode::kConfig, "a palette needs at least 2 classes");
  if (classes_.size() > 256) throw Error(ErrorCode::kConfig, "label maps hold at most 256 classes");
  std::sort(classes_.begin(), classes_.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  std::set<std::string> names;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].index != static_cast<int>(i))
      throw Error(ErrorCode::kConfig, "palette indices must be exactly 0..K-1");
    if (!names.insert(classes_[i].name).second)
      throw Error(ErrorCode::kConfig, "duplicate class name '" + classes_[i].name + "'");
  }
}

ClassPalette ClassPalette::with_class(std::string name, std::array<std::uint8_t, 3> rgb) const {
  auto classes = classes_;
  classes.push_back({size(), std::move(name), rgb});
  return ClassPalette(std::move(classes));
}

LabelMap::LabelMap(int width, int height, int num_classes, std::uint8_t fill)
    : width(width), height(height), num_classes(num_classes) {
  if (width < 1 || height < 1) throw Error(ErrorCode::kShape, "label map dimensions must be >= 1");
  values.assign(static_cast<std::size_t>(width) * height, fill);
}

void validate(const LabelMap& m) {
  if (m.width < 1 || m.height < 1) throw Error(ErrorCode::kShape, "label map dimensions must be >= 1");
  if (m.values.size() != static_cast<std::size_t>(m.width) * m.height)
    throw Error(ErrorCode::kShape, "label map buffer does not match its dimensions");
  if (m.num_classes < 1 || m.num_classes > 256) throw Error(ErrorCode::kConfig, "class count out of range");
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    if (m.values[i] >= m.num_classes) {
      throw Error(ErrorCode::kInvalidLabel, "value " + std::to_string(m.values[i]) + " at pixel (" +
                                                std::to_string(i / m.width) + ", " + std::to_string(i % m.width) +
                                                ") is >= class count " + std::to_string(m.num_classes));
    }
  }
}

bool is_valid(const LabelMap& m) noexcept {
  try {
    validate(m);
    return true;
  } catch (const Error&) {
    return false;
  }
}

ByteImage::ByteImage(int width, int height, std::uint8_t fill) : width(width), height(height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::kShape, "image dimensions must be >= 1");
  data.assign(static_cast<std::size_t>(width) * height * 3, fill);
}

LatentVector::LatentVector(std::vector<float> values) : values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(kLatentDim))
    throw Error(ErrorCode::kShape, "latent vector must have " + std::to_string(kLatentDim) + " components, got " +
                                       std::to_string(values_.size()));
  for (float v : values_)
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "latent vector has a non-finite component");
}

std::vector<ManifestRecord> DatasetManifest::select(Split split) const {
  std::vector<ManifestRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [split](const ManifestRecord& r) { return r.split == split; });
  return out;
}

std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw Error(ErrorCode::kInvalidArgument, "split must be 'train' or 'test', got '" + s + "'");
}

std::vector<std::uint8_t> one_hot_encode(const LabelMap& m, int num_classes) {
  LabelMap checked = m;
  checked.num_classes = num_classes;
  validate(checked);
  const std::size_t plane = m.pixel_count();
  std::vector<std::uint8_t> out(plane * num_classes, 0);
  for (std::size_t i = 0; i < plane; ++i) out[m.values[i] * plane + i] = 1;
  return out;
}

float normalize_value(std::uint8_t v) { return static_cast<float>(v / 127.5 - 1.0); }

std::uint8_t denormalize_value(float x) {
  const double v = std::round((static_cast<double>(x) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

NormImage normalize(const ByteImage& img) {
  NormImage out{img.width, img.height, std::vector<float>(img.data.size())};
  std::transform(img.data.begin(), img.data.end(), out.data.begin(), normalize_value);
  return out;
}

ByteImage denormalize(const NormImage& img) {
  ByteImage out(img.width, img.height);
  std::transform(img.data.begin(), img.data.end(), out.data.begin(), denormalize_value);
  return out;
}

}  // namespace histosynth
