#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace harmscope {

std::array<std::uint8_t, 32> sha256(std::string_view data);

/// Lower-case hex SHA-256 of data.
std::string sha256_hex(std::string_view data);

/// First eight digest bytes, big-endian.
std::uint64_t sha256_u64(std::string_view data);

}  // namespace harmscope
