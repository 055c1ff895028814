#pragma once

#include <cstdint>
#include <string>

#include "prmi/neural/network.hpp"

namespace prmi::neural {

inline constexpr std::uint32_t kWeightsFormatVersion = 1;

/// Binary layout (little-endian): "PRMW", u32 version, model spec (name,
/// widths, layers), u32 tensor count, then per tensor its name, u32 rows,
/// u32 cols and float32 column-major values; trailing CRC32.
void save_weights(const std::string& path, const ModelWeights& weights);

/// Throws FormatError subclasses on corruption and ShapeMismatchError when
/// the tensor table disagrees with the stored spec.
ModelWeights load_weights(const std::string& path);

/// As load_weights, additionally requiring the stored spec to equal `expected`.
ModelWeights load_weights(const std::string& path, const ModelSpec& expected);

}  // namespace prmi::neural
