#pragma once

// Salient-region masks from one forward pass. Each conv layer's feature maps
// are averaged; the topmost average is upscaled (unit-weight transposed
// convolution with that layer's kernel and stride) to the layer below and
// multiplied with its average, and so on down the stack. The bottom product is
// upscaled to input resolution and rescaled to [0, 1].

#include <string>
#include <string_view>
#include <vector>

#include "visback/model.hpp"

namespace visback {

/// One channel, input height x width, values in [0, 1].
struct VisualizationMask {
  Tensorf values;
};

/// levels[k] is the intermediate mask at conv level k (0 = bottom conv layer),
/// sized like that layer's feature maps. The top level is the plain average.
struct MaskTrace {
  std::vector<Tensorf> levels;
};

struct MaskResult {
  VisualizationMask mask;
  MaskTrace trace;
};

MaskResult compute_mask(const ActivationTrace& trace, const NetworkConfig& cfg);

/// Adds gain * mask to the green channel, clamped to [0, 255].
Tensorf overlay(const Tensorf& image_rgb, const VisualizationMask& mask, float gain = 255.0f);

/// 8-bit grey, round(mask * 255).
std::string encode_mask_pgm(const VisualizationMask& mask);

/// "MSK1" | u32 height | u32 width | f32 values row-major, little-endian.
std::string encode_mask_raw(const VisualizationMask& mask);
VisualizationMask decode_mask_raw(std::string_view bytes);

}  // namespace visback
