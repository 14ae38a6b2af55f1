#include "histosynth/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "histosynth/error.hpp"
#include "histosynth/image_io.hpp"

namespace histosynth {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'H', 'S', 'Y', 'N', 'C', 'K', 'P', 'T'};

std::size_t element_size(BlockType t) {
  switch (t) {
    case BlockType::kF32: return 4;
    case BlockType::kF64: return 8;
    case BlockType::kI64: return 8;
    case BlockType::kU8: return 1;
  }
  throw Error(ErrorCode::kCorruption, "unknown block type");
}

BlockType block_type(torch::ScalarType s) {
  switch (s) {
    case torch::kFloat: return BlockType::kF32;
    case torch::kDouble: return BlockType::kF64;
    case torch::kLong: return BlockType::kI64;
    case torch::kUInt8: return BlockType::kU8;
    default: throw Error(ErrorCode::kInvalidArgument, "unsupported tensor dtype for checkpointing");
  }
}

torch::ScalarType scalar_type(BlockType t) {
  switch (t) {
    case BlockType::kF32: return torch::kFloat;
    case BlockType::kF64: return torch::kDouble;
    case BlockType::kI64: return torch::kLong;
    case BlockType::kU8: return torch::kUInt8;
  }
  throw Error(ErrorCode::kCorruption, "unknown block type");
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }

  const std::uint8_t* take(std::size_t n) {
    if (n > end_ - pos_) throw Error(ErrorCode::kCorruption, "checkpoint is truncated");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t position() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

void Container::add(Block b) {
  if (index_.count(b.name)) throw Error(ErrorCode::kInvalidArgument, "duplicate block '" + b.name + "'");
  index_[b.name] = blocks_.size();
  blocks_.push_back(std::move(b));
}

void Container::put_tensor(const std::string& name, const torch::Tensor& t) {
  const auto c = t.detach().cpu().contiguous();
  Block b;
  b.name = name;
  b.type = block_type(c.scalar_type());
  b.shape.assign(c.sizes().begin(), c.sizes().end());
  b.data.resize(c.numel() * element_size(b.type));
  if (!b.data.empty()) std::memcpy(b.data.data(), c.data_ptr(), b.data.size());
  add(std::move(b));
}

void Container::put_text(const std::string& name, const std::string& text) {
  Block b;
  b.name = name;
  b.type = BlockType::kU8;
  b.shape = {static_cast<std::int64_t>(text.size())};
  b.data.assign(text.begin(), text.end());
  add(std::move(b));
}

void Container::put_int(const std::string& name, std::int64_t v) { put_tensor(name, torch::tensor({v}, torch::kLong)); }

const Block& Container::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::kCorruption, "checkpoint has no block '" + name + "'");
  return blocks_[it->second];
}

torch::Tensor Container::tensor(const std::string& name) const {
  const auto& b = get(name);
  auto t = torch::empty(b.shape, scalar_type(b.type));
  if (!b.data.empty()) std::memcpy(t.data_ptr(), b.data.data(), b.data.size());
  return t;
}

std::string Container::text(const std::string& name) const {
  const auto& b = get(name);
  return {b.data.begin(), b.data.end()};
}

std::int64_t Container::integer(const std::string& name) const { return tensor(name).item<std::int64_t>(); }

std::vector<std::string> Container::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& b : blocks_)
    if (b.name.rfind(prefix, 0) == 0) out.push_back(b.name);
  return out;
}

std::vector<std::uint8_t> serialize(const Container& c) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.blocks().size()));
  for (const auto& b : c.blocks()) {
    if (b.name.size() > 0xffff) throw Error(ErrorCode::kInvalidArgument, "block name too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(b.name.size()));
    out.insert(out.end(), b.name.begin(), b.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(b.type));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(b.shape.size()));
    for (auto d : b.shape) put<std::int64_t>(out, d);
    put<std::uint64_t>(out, b.data.size());
    out.insert(out.end(), b.data.begin(), b.data.end());
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size()))));
  return out;
}

Container deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 + 4 + 4 + 4 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw Error(ErrorCode::kCorruption, "not a checkpoint (bad magic or too short)");
  Reader r(bytes, bytes.size() - 4);
  r.take(8);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::kVersion, "checkpoint version " + std::to_string(version) + ", expected " +
                                         std::to_string(kCheckpointVersion));
  const auto count = r.get<std::uint32_t>();
  Container c;
  for (std::uint32_t i = 0; i < count; ++i) {
    Block b;
    const auto name_len = r.get<std::uint16_t>();
    const auto* name = r.take(name_len);
    b.name.assign(reinterpret_cast<const char*>(name), name_len);
    const auto type = r.get<std::uint8_t>();
    if (type > 3) throw Error(ErrorCode::kCorruption, "unknown block type in '" + b.name + "'");
    b.type = static_cast<BlockType>(type);
    const auto ndim = r.get<std::uint8_t>();
    std::int64_t numel = 1;
    for (int d = 0; d < ndim; ++d) {
      b.shape.push_back(r.get<std::int64_t>());
      if (b.shape.back() < 0) throw Error(ErrorCode::kCorruption, "negative dimension in '" + b.name + "'");
      numel *= b.shape.back();
    }
    const auto nbytes = r.get<std::uint64_t>();
    if (nbytes != static_cast<std::uint64_t>(numel) * element_size(b.type))
      throw Error(ErrorCode::kCorruption, "block '" + b.name + "' size does not match its shape");
    const auto* data = r.take(nbytes);
    b.data.assign(data, data + nbytes);
    c.add(std::move(b));
  }
  if (r.position() != bytes.size() - 4) throw Error(ErrorCode::kCorruption, "trailing bytes after the last block");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (stored != static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4))))
    throw Error(ErrorCode::kCorruption, "checksum mismatch");
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Container& c) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  io::write_file(tmp, serialize(c));
  std::filesystem::rename(tmp, path);
}

Container read_checkpoint(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

void put_module(Container& c, const std::string& prefix, const torch::nn::Module& m) {
  for (const auto& p : m.named_parameters(true)) c.put_tensor(prefix + p.key(), p.value());
  for (const auto& b : m.named_buffers(true)) c.put_tensor(prefix + b.key(), b.value());
}

void load_module(const Container& c, const std::string& prefix, torch::nn::Module& m) {
  torch::NoGradGuard guard;
  auto copy = [&](const std::string& key, torch::Tensor& dst) {
    const auto src = c.tensor(prefix + key);
    if (src.sizes() != dst.sizes())
      throw Error(ErrorCode::kCorruption, "block '" + prefix + key + "' has an unexpected shape");
    dst.copy_(src.to(dst.dtype()));
  };
  for (auto& p : m.named_parameters(true)) copy(p.key(), p.value());
  for (auto& b : m.named_buffers(true)) copy(b.key(), b.value());
}

std::uint32_t parameter_hash(const torch::nn::Module& m, bool include_buffers) {
  uLong crc = crc32(0L, Z_NULL, 0);
  auto feed = [&](const torch::Tensor& t) {
    const auto c = t.detach().cpu().contiguous();
    crc = crc32(crc, static_cast<const Bytef*>(c.data_ptr()), static_cast<uInt>(c.numel() * c.element_size()));
  };
  for (const auto& p : m.parameters(true)) feed(p);
  if (include_buffers)
    for (const auto& b : m.buffers(true)) feed(b);
  return static_cast<std::uint32_t>(crc);
}

}  // namespace histosynth
