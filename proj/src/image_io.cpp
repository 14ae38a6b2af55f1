#include "histosynth/image_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "histosynth/error.hpp"

namespace histosynth::io {
namespace {

using json = nlohmann::json;

struct MemoryReader {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset = 0;
};

void read_callback(png_structp png, png_bytep out, png_size_t n) {
  auto* src = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (src->offset + n > src->bytes->size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, src->bytes->data() + src->offset, n);
  src->offset += n;
}

void write_callback(png_structp png, png_bytep data, png_size_t n) {
  auto* dst = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  dst->insert(dst->end(), data, data + n);
}

void flush_callback(png_structp) {}

[[noreturn]] void error_callback(png_structp, png_const_charp msg) { throw Error(ErrorCode::kIo, msg); }
void warning_callback(png_structp, png_const_charp) {}

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

// keep_indices: palette images return raw indices as a single channel.
Decoded decode(const std::vector<std::uint8_t>& bytes, bool keep_indices) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error(ErrorCode::kIo, "not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
  png_infop info = png_create_info_struct(png);
  Decoded out;
  try {
    MemoryReader reader{&bytes};
    png_set_read_fn(png, &reader, read_callback);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) {
      if (keep_indices) {
        if (depth < 8) png_set_packing(png);
      } else {
        png_set_palette_to_rgb(png);
      }
    } else if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS) && !(color == PNG_COLOR_TYPE_PALETTE && keep_indices))
      png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    out.pixels.resize(row_bytes * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::vector<std::uint8_t> encode(int width, int height, int color_type, int channels, const std::uint8_t* pixels) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, write_callback, flush_callback);
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
      png_write_row(png, const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * width * channels));
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ByteImage& img) {
  return encode(img.width, img.height, PNG_COLOR_TYPE_RGB, 3, img.data.data());
}

std::vector<std::uint8_t> encode_png(const LabelMap& m) {
  return encode(m.width, m.height, PNG_COLOR_TYPE_GRAY, 1, m.values.data());
}

ByteImage decode_rgb_png(const std::vector<std::uint8_t>& bytes) {
  Decoded d = decode(bytes, false);
  ByteImage img(d.width, d.height);
  if (d.channels == 3) {
    img.data = std::move(d.pixels);
  } else if (d.channels == 1) {
    for (std::size_t i = 0; i < d.pixels.size(); ++i)
      for (int c = 0; c < 3; ++c) img.data[i * 3 + c] = d.pixels[i];
  } else {
    throw Error(ErrorCode::kIo, "unsupported PNG channel layout");
  }
  return img;
}

LabelMap decode_label_png(const std::vector<std::uint8_t>& bytes, int num_classes) {
  Decoded d = decode(bytes, true);
  if (d.channels != 1) throw Error(ErrorCode::kIo, "label maps must be single-channel PNGs");
  LabelMap m(d.width, d.height, num_classes);
  m.values = std::move(d.pixels);
  return m;
}

void write_png(const std::filesystem::path& path, const ByteImage& img) { write_file(path, encode_png(img)); }
void write_png(const std::filesystem::path& path, const LabelMap& m) { write_file(path, encode_png(m)); }
ByteImage read_rgb_png(const std::filesystem::path& path) { return decode_rgb_png(read_file(path)); }
LabelMap read_label_png(const std::filesystem::path& path, int num_classes) {
  return decode_label_png(read_file(path), num_classes);
}

std::string palette_to_json(const ClassPalette& p) {
  json classes = json::array();
  for (const auto& c : p.classes())
    classes.push_back({{"index", c.index}, {"name", c.name}, {"rgb", {c.display_rgb[0], c.display_rgb[1], c.display_rgb[2]}}});
  return json{{"classes", classes}}.dump(2) + "\n";
}

ClassPalette palette_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    std::vector<ClassInfo> classes;
    for (const auto& c : doc.at("classes")) {
      ClassInfo info;
      info.index = c.at("index").get<int>();
      info.name = c.at("name").get<std::string>();
      const auto rgb = c.at("rgb").get<std::vector<int>>();
      if (rgb.size() != 3) throw Error(ErrorCode::kConfig, "palette rgb must have 3 entries");
      for (int i = 0; i < 3; ++i) info.display_rgb[i] = static_cast<std::uint8_t>(rgb[i]);
      classes.push_back(std::move(info));
    }
    return ClassPalette(std::move(classes));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed palette: ") + e.what());
  }
}

void write_palette(const std::filesystem::path& path, const ClassPalette& p) { write_text(path, palette_to_json(p)); }
ClassPalette read_palette(const std::filesystem::path& path) { return palette_from_json(read_text(path)); }

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ostringstream os;
  for (const auto& r : m.records)
    os << json{{"image", r.image.generic_string()}, {"label", r.label.generic_string()}, {"split", to_string(r.split)}}
              .dump()
       << "\n";
  write_text(path, os.str());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  const auto base = path.parent_path();
  DatasetManifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      ManifestRecord r;
      r.image = rec.at("image").get<std::string>();
      r.label = rec.at("label").get<std::string>();
      r.split = split_from_string(rec.at("split").get<std::string>());
      if (r.image.is_relative()) r.image = base / r.image;
      if (r.label.is_relative()) r.label = base / r.label;
      m.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

void check_manifest(const DatasetManifest& m) {
  for (const auto& r : m.records) {
    for (const auto& p : {r.image, r.label})
      if (!std::filesystem::exists(p)) throw Error(ErrorCode::kIo, "missing file " + p.string());
    const auto img = read_rgb_png(r.image);
    const auto lab = read_label_png(r.label, 256);
    if (img.width != lab.width || img.height != lab.height)
      throw Error(ErrorCode::kAlignment, "dimension mismatch between " + r.image.string() + " and " + r.label.string());
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ByteImage contact_sheet(const std::vector<ByteImage>& tiles, int cols) {
  if (tiles.empty() || cols < 1) throw Error(ErrorCode::kInvalidArgument, "contact sheet needs tiles");
  const int w = tiles.front().width, h = tiles.front().height;
  const int n = static_cast<int>(tiles.size());
  cols = std::min(cols, n);
  const int rows = (n + cols - 1) / cols;
  ByteImage sheet(w * cols, h * rows, 255);
  for (int i = 0; i < n; ++i) {
    if (tiles[i].width != w || tiles[i].height != h) throw Error(ErrorCode::kShape, "contact sheet tiles differ in size");
    const int ox = (i % cols) * w, oy = (i / cols) * h;
    for (int y = 0; y < h; ++y)
      std::memcpy(&sheet.at(oy + y, ox, 0), &tiles[i].at(y, 0, 0), static_cast<std::size_t>(w) * 3);
  }
  return sheet;
}

ByteImage colorize(const LabelMap& m, const ClassPalette& p) {
  ByteImage out(m.width, m.height);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const auto& rgb = p[m.values[i]].display_rgb;
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = rgb[c];
  }
  return out;
}

}  // namespace histosynth::io
