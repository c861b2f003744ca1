#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsn/model.hpp"

namespace hsn {

inline constexpr uint16_t kCheckpointVersion = 1;

/// "HSNW" | version | config text | block count | (name, rows, cols, f64 data)* | CRC32 of all preceding bytes.
std::vector<uint8_t> serialize_checkpoint(const Network& net);
/// Rebuilds the network from the embedded config and checks every block
/// against its layout.
Network parse_checkpoint(std::span<const uint8_t> bytes);
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace hsn
