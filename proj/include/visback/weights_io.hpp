#pragma once

#include <string>

#include "visback/model.hpp"

namespace visback {

struct WeightFile {
  NetworkConfig config;
  WeightSet weights;
};

/// Binary layout (all integers little-endian):
///   "PNW1" | u32 n | n bytes canonical config JSON |
///   per conv/FC layer: u32 weight count, u32 bias count, f32 weights, f32 biases |
///   u32 CRC32 of every preceding byte.
std::string encode_weights(const NetworkConfig& cfg, const WeightSet& weights);

/// Throws Error with code format (magic/JSON), truncated, or checksum.
WeightFile decode_weights(std::string_view bytes);

void save_weights(const NetworkConfig& cfg, const WeightSet& weights, const std::string& path);
WeightFile load_weights(const std::string& path);

}  // namespace visback
