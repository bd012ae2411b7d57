#include "fedprune/checkpoint.hpp"

#include "fedprune/binary_io.hpp"
#include "fedprune/errors.hpp"

namespace fedprune {

std::vector<std::uint8_t> encode_checkpoint(const Network& net) {
  const Architecture& arch = net.architecture();
  ByteWriter w;
  w.magic("FPNN");
  w.u16(kCheckpointVersion);
  w.u16(static_cast<std::uint16_t>(arch.input.size()));
  for (std::size_t d : arch.input) w.u32(static_cast<std::uint32_t>(d));
  w.u16(static_cast<std::uint16_t>(arch.layers.size()));
  for (const LayerSpec& s : arch.layers) {
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.u32(static_cast<std::uint32_t>(s.units));
    w.u16(static_cast<std::uint16_t>(s.kernel));
    w.u8(s.same_padding ? 1 : 0);
    w.u16(static_cast<std::uint16_t>(s.window));
  }
  w.u64(net.parameter_count());
  for (float v : net.parameters()) w.f32(v);
  return w.take();
}

Network decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  r.expect_magic("FPNN");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  Architecture arch;
  const std::uint16_t rank = r.u16();
  for (std::uint16_t i = 0; i < rank; ++i) arch.input.push_back(r.u32());
  const std::uint16_t count = r.u16();
  for (std::uint16_t i = 0; i < count; ++i) {
    LayerSpec s;
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::flatten)) {
      throw IoError("checkpoint: unknown layer kind " + std::to_string(kind));
    }
    s.kind = static_cast<LayerKind>(kind);
    s.units = r.u32();
    s.kernel = r.u16();
    s.same_padding = r.u8() != 0;
    s.window = r.u16();
    arch.layers.push_back(s);
  }
  Network net(std::move(arch));
  const std::uint64_t n = r.u64();
  if (n != net.parameter_count()) {
    throw IoError("checkpoint: " + std::to_string(n) +
                  " parameters stored, architecture needs " +
                  std::to_string(net.parameter_count()));
  }
  std::vector<float> params(n);
  for (auto& v : params) v = r.f32();
  r.expect_end();
  // route through the finite check applied to all external data
  const std::size_t size = params.size();
  auto checked = Tensor::from_external({size}, std::move(params));
  net.set_parameters(checked.data());
  return net;
}

void save_checkpoint(const Network& net, const std::string& path) {
  write_file(path, encode_checkpoint(net));
}

Network load_checkpoint(const std::string& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace fedprune
