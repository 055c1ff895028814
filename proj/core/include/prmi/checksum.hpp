#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace prmi {

std::uint32_t crc32(std::span<const std::byte> data, std::uint32_t seed = 0);

}  // namespace prmi
