#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedprune/network.hpp"

namespace fedprune {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// "FPNN" | version u16 | input rank u16, dims u32... | layer count u16 |
/// per layer: kind u8, units u32, kernel u16, same_padding u8, window u16 |
/// parameter count u64 | parameters as f32, canonical order. Little-endian.
std::vector<std::uint8_t> encode_checkpoint(const Network& net);
Network decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace fedprune
