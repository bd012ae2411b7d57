#include "fedprune/codec.hpp"

#include "fedprune/binary_io.hpp"
#include "fedprune/errors.hpp"

namespace fedprune {

SparsePayload encode_sparse(std::span<const float> params, const PruningMask& mask,
                            std::uint32_t round) {
  if (params.size() != mask.size()) {
    throw InvalidArgument("encode_sparse: vector has " + std::to_string(params.size()) +
                          " entries, mask " + std::to_string(mask.size()));
  }
  SparsePayload p;
  p.round = round;
  p.mask_digest = mask.digest();
  p.values.reserve(mask.kept_count());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (mask.keeps(i)) {
      p.values.push_back(params[i]);
    } else if (params[i] != 0.0f) {
      throw IntegrityError("encode_sparse: masked coordinate " + std::to_string(i) +
                           " holds " + std::to_string(params[i]));
    }
  }
  return p;
}

ParameterVector decode_sparse(const SparsePayload& payload, const PruningMask& mask) {
  if (payload.mask_digest != mask.digest()) {
    throw ProtocolError("decode_sparse: payload digest does not match the mask");
  }
  if (payload.values.size() != mask.kept_count()) {
    throw ProtocolError("decode_sparse: " + std::to_string(payload.values.size()) +
                        " values for " + std::to_string(mask.kept_count()) +
                        " kept coordinates");
  }
  ParameterVector out(mask.size(), 0.0f);
  std::size_t next = 0;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask.keeps(i)) out[i] = payload.values[next++];
  return out;
}

std::vector<std::uint8_t> serialize_payload(const SparsePayload& payload) {
  ByteWriter w;
  w.u32(payload.round);
  w.u32(static_cast<std::uint32_t>(payload.values.size()));
  w.u64(payload.mask_digest);
  for (float v : payload.values) w.f32(v);
  return w.take();
}

SparsePayload parse_payload(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "payload");
  SparsePayload p;
  p.round = r.u32();
  const std::uint32_t count = r.u32();
  p.mask_digest = r.u64();
  if (r.remaining() != std::size_t{count} * 4) {
    throw ProtocolError("payload: header announces " + std::to_string(count) +
                        " values, body holds " + std::to_string(r.remaining()) + " bytes");
  }
  p.values.resize(count);
  for (auto& v : p.values) v = r.f32();
  return p;
}

}  // namespace fedprune
