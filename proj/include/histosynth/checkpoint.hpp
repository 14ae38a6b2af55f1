#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace histosynth {

// Single-file container of named blocks.
//
//   magic      8 bytes  "HSYNCKPT"
//   version    u32      kCheckpointVersion
//   count      u32      number of blocks
//   block * count:
//     name_len u16, name bytes (UTF-8)
//     dtype    u8       0 = f32, 1 = f64, 2 = i64, 3 = u8 (text blocks are u8)
//     ndim     u8, dims i64 * ndim
//     nbytes   u64, raw little-endian data
//   crc32      u32      over every preceding byte
//
// All integers little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class BlockType : std::uint8_t { kF32 = 0, kF64 = 1, kI64 = 2, kU8 = 3 };

struct Block {
  std::string name;
  BlockType type = BlockType::kU8;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> data;
};

class Container {
 public:
  void put_tensor(const std::string& name, const torch::Tensor& t);
  void put_text(const std::string& name, const std::string& text);
  void put_int(const std::string& name, std::int64_t v);

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  torch::Tensor tensor(const std::string& name) const;
  std::string text(const std::string& name) const;
  std::int64_t integer(const std::string& name) const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

  const std::vector<Block>& blocks() const { return blocks_; }
  void add(Block b);

 private:
  const Block& get(const std::string& name) const;

  std::vector<Block> blocks_;
  std::map<std::string, std::size_t> index_;
};

std::vector<std::uint8_t> serialize(const Container& c);
/// Throws kCorruption on truncation or checksum failure and kVersion on a version mismatch.
Container deserialize(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const Container& c);
Container read_checkpoint(const std::filesystem::path& path);

/// Parameters then buffers, in registration order, under prefix.
void put_module(Container& c, const std::string& prefix, const torch::nn::Module& m);
/// Copies every parameter and buffer from the container; missing or mis-shaped blocks throw.
void load_module(const Container& c, const std::string& prefix, torch::nn::Module& m);

/// CRC32 over parameter and buffer bytes (cheap identity check for "unchanged" assertions).
std::uint32_t parameter_hash(const torch::nn::Module& m, bool include_buffers = true);

}  // namespace histosynth
