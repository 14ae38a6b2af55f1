#include "histosynth/dataset.hpp"

#include <algorithm>
#include <map>

#include "histosynth/error.hpp"
#include "histosynth/image_io.hpp"

namespace histosynth::dataset {
namespace fs = std::filesystem;

fs::path write_dataset(const fs::path& dir, const ClassPalette& palette, const std::vector<NamedPair>& pairs) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  DatasetManifest manifest;
  for (const auto& p : pairs) {
    const auto image = fs::path("images") / (p.name + ".png");
    const auto label = fs::path("labels") / (p.name + ".png");
    io::write_png(dir / image, p.pair.image);
    io::write_png(dir / label, p.pair.label);
    manifest.records.push_back({image, label, p.split});
  }
  io::write_palette(dir / kPaletteName, palette);
  io::write_manifest(dir / kManifestName, manifest);
  return dir / kManifestName;
}

train::PairedDataset load_split(const fs::path& dir_or_manifest, Split split) {
  const auto manifest = fs::is_directory(dir_or_manifest) ? dir_or_manifest / kManifestName : dir_or_manifest;
  const auto palette = io::read_palette(manifest.parent_path() / kPaletteName);
  return train::PairedDataset::from_manifest(io::read_manifest(manifest), split, palette);
}

SourceScan scan_sources(const fs::path& dir) {
  std::map<std::string, fs::path> images, labels;
  auto collect = [](const fs::path& sub, std::map<std::string, fs::path>& out) {
    if (!fs::is_directory(sub)) return;
    for (const auto& e : fs::directory_iterator(sub))
      if (e.is_regular_file() && e.path().extension() == ".png") out[e.path().stem().string()] = e.path();
  };
  collect(dir / "images", images);
  collect(dir / "labels", labels);

  SourceScan scan;
  for (const auto& [stem, image] : images) {
    const auto it = labels.find(stem);
    if (it == labels.end()) {
      scan.unpaired.push_back(image);
    } else {
      scan.pairs.emplace_back(image, it->second);
    }
  }
  for (const auto& [stem, label] : labels)
    if (!images.count(stem)) scan.unpaired.push_back(label);
  std::sort(scan.unpaired.begin(), scan.unpaired.end());
  return scan;
}

}  // namespace histosynth::dataset
