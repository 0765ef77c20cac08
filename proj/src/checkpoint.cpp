#include <fstream>
#include <iterator>

#include "laid/binio.hpp"
#include "laid/nn.hpp"

namespace laid {

namespace binio {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "short write to '" + path + "'");
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace binio

namespace nn {

namespace {
constexpr char kMagic[9] = "LAIDCKPT";
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const NetworkGraph& net) {
  binio::Writer w;
  w.tag(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const LayerSpec& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.kind));
    w.u32(static_cast<std::uint32_t>(l.in));
    w.u32(static_cast<std::uint32_t>(l.out));
    w.u32(static_cast<std::uint32_t>(l.kernel));
    w.u32(static_cast<std::uint32_t>(l.stride));
    w.u32(static_cast<std::uint32_t>(l.padding));
  }
  w.u64(net.params().size());
  w.u64(net.buffers().size());
  for (float v : net.params()) w.f32(v);
  for (float v : net.buffers()) w.f32(v);
  w.u64(w.size() + 8);
  return std::move(w.buffer());
}

NetworkGraph deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes, ErrorKind::Data);
  if (!r.tag(kMagic)) throw Error(ErrorKind::Data, "not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw Error(ErrorKind::Data, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<LayerSpec> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerSpec l;
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(LayerKind::BatchNorm2d)) {
      throw Error(ErrorKind::Data, "unknown layer kind " + std::to_string(kind));
    }
    l.kind = static_cast<LayerKind>(kind);
    l.in = r.u32();
    l.out = r.u32();
    l.kernel = r.u32();
    l.stride = r.u32();
    l.padding = r.u32();
    layers.push_back(l);
  }
  NetworkGraph net(std::move(layers));
  const std::uint64_t np = r.u64();
  const std::uint64_t nb = r.u64();
  if (np != net.params().size() || nb != net.buffers().size()) {
    throw Error(ErrorKind::Data, "checkpoint payload does not match its layer table");
  }
  r.need((np + nb) * 4 + 8);
  for (float& v : net.params()) v = r.f32();
  for (float& v : net.buffers()) v = r.f32();
  const std::uint64_t length = r.u64();
  if (length != bytes.size() || r.remaining() != 0) {
    throw Error(ErrorKind::Data, "checkpoint length check failed");
  }
  return net;
}

void save_checkpoint(const NetworkGraph& net, const std::string& path) {
  binio::write_file(path, serialize_checkpoint(net));
}

NetworkGraph load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(binio::read_file(path));
}

}  // namespace nn
}  // namespace laid
