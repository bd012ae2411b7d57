#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedprune/pruning.hpp"

namespace fedprune {

/// Surviving parameters of a masked vector, in canonical order.
struct SparsePayload {
  std::uint32_t round = 0;
  std::uint64_t mask_digest = 0;
  std::vector<float> values;

  bool operator==(const SparsePayload&) const = default;
};

inline constexpr std::size_t kPayloadHeaderBytes = 16;

/// Wire size: round u32 + value count u32 + mask digest u64, then 4 bytes
/// per value.
inline std::size_t payload_bytes(const SparsePayload& p) {
  return kPayloadHeaderBytes + 4 * p.values.size();
}

/// Throws IntegrityError if a masked coordinate holds a nonzero value.
SparsePayload encode_sparse(std::span<const float> params, const PruningMask& mask,
                            std::uint32_t round);

/// Throws ProtocolError on digest or length mismatch.
ParameterVector decode_sparse(const SparsePayload& payload, const PruningMask& mask);

std::vector<std::uint8_t> serialize_payload(const SparsePayload& payload);
SparsePayload parse_payload(std::span<const std::uint8_t> bytes);

}  // namespace fedprune
