#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "histosynth/data_model.hpp"

namespace histosynth::io {

// PNG codecs. Label maps are 8-bit single-channel (grayscale or palette-indexed
// on input; grayscale on output) with the pixel value equal to the class index.
std::vector<std::uint8_t> encode_png(const ByteImage& img);
std::vector<std::uint8_t> encode_png(const LabelMap& m);
ByteImage decode_rgb_png(const std::vector<std::uint8_t>& bytes);
/// Pixel values are taken verbatim; num_classes is set but not validated.
LabelMap decode_label_png(const std::vector<std::uint8_t>& bytes, int num_classes);

void write_png(const std::filesystem::path& path, const ByteImage& img);
void write_png(const std::filesystem::path& path, const LabelMap& m);
ByteImage read_rgb_png(const std::filesystem::path& path);
LabelMap read_label_png(const std::filesystem::path& path, int num_classes);

/// Palette sidecar: {"classes": [{"index": 0, "name": "...", "rgb": [r, g, b]}, ...]}
std::string palette_to_json(const ClassPalette& p);
ClassPalette palette_from_json(const std::string& text);
void write_palette(const std::filesystem::path& path, const ClassPalette& p);
ClassPalette read_palette(const std::filesystem::path& path);

/// One JSON object per line: {"image": "...", "label": "...", "split": "train"|"test"}.
/// Relative paths resolve against the manifest's directory.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);
/// Throws if a paired file is missing or the pair's dimensions differ.
void check_manifest(const DatasetManifest& m);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Tiles equally sized images into a rows x cols sheet.
ByteImage contact_sheet(const std::vector<ByteImage>& tiles, int cols);

/// Renders class indices with the palette display colors.
ByteImage colorize(const LabelMap& m, const ClassPalette& p);

}  // namespace histosynth::io
