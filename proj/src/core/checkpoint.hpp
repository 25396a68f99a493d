#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace tbf {

// On-disk record: values are stored as little-endian f32, so anything put
// here must already live on the f32 grid for a bit-exact round trip.
struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::uint32_t crc32_ieee(const std::uint8_t* data, std::size_t n);

// Format: "TBF1", u32 version, u32 count; per tensor u16 name length +
// name bytes, u8 rank, u32 extents, f32 payload; trailing CRC32 over every
// preceding byte. All integers and floats little-endian.
void write_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::string& path);

}  // namespace tbf
