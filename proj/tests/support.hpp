#pragma once

// torch's logging header also defines CHECK; doctest's must win.
#include <torch/torch.h>
#undef CHECK
#include <doctest.h>

#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "histosynth/data_model.hpp"
#include "histosynth/error.hpp"
#include "histosynth/rng.hpp"

namespace testing {

/// Code of the histosynth::Error thrown by f, or nullopt when f returns normally.
template <class F>
std::optional<histosynth::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const histosynth::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline histosynth::LabelMap random_map(histosynth::Rng& rng, int w, int h, int k) {
  histosynth::LabelMap m(w, h, k);
  for (auto& v : m.values) v = static_cast<std::uint8_t>(rng.uniform_int(k));
  return m;
}

inline histosynth::ByteImage random_image(histosynth::Rng& rng, int w, int h) {
  histosynth::ByteImage img(w, h);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(256));
  return img;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("histosynth_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
