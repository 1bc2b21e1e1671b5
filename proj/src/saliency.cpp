#include "visback/saliency.hpp"

#include "visback/fileio.hpp"
#include "visback/image_io.hpp"

namespace visback {

MaskResult compute_mask(const ActivationTrace& trace, const NetworkConfig& cfg) {
  NetworkConfig resolved = cfg;
  const ShapeTable table = validate_config(resolved);
  const std::size_t levels = table.conv_layers.size();
  if (trace.entries.size() != levels + 1)
    throw Error(ErrorCode::config, "compute_mask: trace has " + std::to_string(trace.entries.size()) +
                                       " entries, config implies " + std::to_string(levels + 1));
  detail::check_same_shape(table.input, trace.entries[0].activation.shape(), "compute_mask input entry");

  // The product chain spans several orders of magnitude; carry it in double.
  std::vector<Tensord> averaged;
  averaged.reserve(levels);
  for (std::size_t k = 0; k < levels; ++k) {
    const TraceEntry& e = trace.entries[k + 1];
    const int layer = table.conv_layers[k];
    if (e.layer_index != layer)
      throw Error(ErrorCode::config, "compute_mask: trace entry " + std::to_string(k + 1) + " is layer " +
                                         std::to_string(e.layer_index) + ", expected " + std::to_string(layer));
    detail::check_same_shape(table.outputs[layer], e.activation.shape(), "compute_mask feature maps");
    averaged.push_back(channel_mean(e.activation.cast<double>()));
  }

  MaskResult result;
  result.trace.levels.resize(levels);
  Tensord mask = averaged.back();
  result.trace.levels[levels - 1] = mask.cast<float>();
  for (std::size_t k = levels - 1; k > 0; --k) {
    const ConvGeometry& g = resolved.layers[table.conv_layers[k]].geometry;
    const Tensord& below = averaged[k - 1];
    mask = elementwise_mul(deconv_upscale(mask, g, below.height(), below.width()), below);
    result.trace.levels[k - 1] = mask.cast<float>();
  }
  const ConvGeometry& bottom = resolved.layers[table.conv_layers.front()].geometry;
  result.mask.values = normalize_01(deconv_upscale(mask, bottom, table.input.height, table.input.width)).cast<float>();
  return result;
}

Tensorf overlay(const Tensorf& image_rgb, const VisualizationMask& mask, float gain) {
  if (image_rgb.channels() != 3) throw ShapeError("channels", 3, image_rgb.channels(), "overlay image");
  if (mask.values.height() != image_rgb.height())
    throw ShapeError("height", image_rgb.height(), mask.values.height(), "overlay mask");
  if (mask.values.width() != image_rgb.width())
    throw ShapeError("width", image_rgb.width(), mask.values.width(), "overlay mask");
  Tensorf out = image_rgb;
  out.channel(1) = (out.channel(1).array() + gain * mask.values.channel(0).array()).cwiseMax(0.0f).cwiseMin(255.0f).matrix();
  return out;
}

std::string encode_mask_pgm(const VisualizationMask& mask) {
  Tensorf scaled(mask.values.shape());
  scaled.values() = mask.values.values() * 255.0f;
  return encode_pgm(scaled);
}

std::string encode_mask_raw(const VisualizationMask& mask) {
  std::string out = "MSK1";
  put_u32(out, std::uint32_t(mask.values.height()));
  put_u32(out, std::uint32_t(mask.values.width()));
  for (float v : mask.values.values()) put_f32(out, v);
  return out;
}

VisualizationMask decode_mask_raw(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "MSK1") throw Error(ErrorCode::format, "not a raw mask (bad magic)");
  if (bytes.size() < 12) throw Error(ErrorCode::truncated, "raw mask header truncated");
  const std::uint32_t h = get_u32(bytes, 4), w = get_u32(bytes, 8);
  if (h == 0 || w == 0) throw Error(ErrorCode::format, "raw mask has zero size");
  if (bytes.size() != 12 + 4ull * h * w) throw Error(ErrorCode::truncated, "raw mask payload size mismatch");
  VisualizationMask m{Tensorf(1, int(h), int(w))};
  for (long i = 0; i < m.values.size(); ++i) m.values.values()[i] = get_f32(bytes, 12 + 4 * std::size_t(i));
  return m;
}

}  // namespace visback
