#include "ctct/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ctct/error.hpp"

namespace ctct {

namespace {

constexpr char kMagic[] = "CRNNCKPT1\n";
constexpr size_t kMagicLen = 10;

template <typename T>
void write_le(std::ostream& out, T v) {
  // little-endian on all supported targets
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw Error(ErrorKind::BadCheckpoint, path + ": truncated");
  return v;
}

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write checkpoint " + path);
  out.write(kMagic, kMagicLen);
  std::string cfg = ckpt.config.canonical_text();
  write_le<uint32_t>(out, static_cast<uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_le<uint32_t>(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const CheckpointTensor& t : ckpt.tensors) {
    write_le<uint32_t>(out, static_cast<uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_le<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
    uint64_t numel = 1;
    for (uint64_t e : t.shape) {
      write_le<uint64_t>(out, e);
      numel *= e;
    }
    if (numel != t.data.size())
      throw Error(ErrorKind::ShapeError, "tensor " + t.name + " data/shape mismatch");
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorKind::IoError, "checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open checkpoint " + path);
  char magic[kMagicLen];
  in.read(magic, kMagicLen);
  if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0)
    throw Error(ErrorKind::BadCheckpoint, path + ": bad magic");
  Checkpoint ckpt;
  uint32_t cfg_len = read_le<uint32_t>(in, path);
  std::string cfg(cfg_len, '\0');
  in.read(cfg.data(), cfg_len);
  if (!in) throw Error(ErrorKind::BadCheckpoint, path + ": truncated config");
  ckpt.config = KeyValueConfig::parse_text(cfg, path + "#config");
  uint32_t count = read_le<uint32_t>(in, path);
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    uint32_t name_len = read_le<uint32_t>(in, path);
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    uint32_t rank = read_le<uint32_t>(in, path);
    uint64_t numel = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      uint64_t e = read_le<uint64_t>(in, path);
      t.shape.push_back(e);
      numel *= e;
    }
    if (numel > (1ull << 32))
      throw Error(ErrorKind::BadCheckpoint, path + ": implausible tensor size");
    t.data.resize(numel);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(numel * sizeof(float)));
    if (!in) throw Error(ErrorKind::BadCheckpoint, path + ": truncated tensor " + t.name);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace ctct
