#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "histosynth/data_model.hpp"
#include "histosynth/stain_prep.hpp"
#include "histosynth/training.hpp"

namespace histosynth::dataset {

/// On-disk layout shared by every pipeline stage:
///   <dir>/images/<name>.png   RGB patch
///   <dir>/labels/<name>.png   single-channel class indices
///   <dir>/palette.json
///   <dir>/manifest.jsonl      one record per pair, paths relative to <dir>
inline constexpr const char* kManifestName = "manifest.jsonl";
inline constexpr const char* kPaletteName = "palette.json";

struct NamedPair {
  std::string name;
  stain::PatchPair pair;
  Split split = Split::kTrain;
};

/// Writes the pairs and returns the manifest path. Existing files are overwritten.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const ClassPalette& palette,
                                    const std::vector<NamedPair>& pairs);

/// Accepts either the dataset directory or its manifest; the palette is read from the same directory.
train::PairedDataset load_split(const std::filesystem::path& dir_or_manifest, Split split);

/// Source pairs for preprocessing: <dir>/images/*.png matched by stem to <dir>/labels/*.png.
struct SourceScan {
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pairs;
  std::vector<std::filesystem::path> unpaired;
};
SourceScan scan_sources(const std::filesystem::path& dir);

}  // namespace histosynth::dataset
