#include "visback/weights_io.hpp"

#include <nlohmann/json.hpp>

#include "visback/fileio.hpp"

namespace visback {

namespace {

constexpr std::string_view kMagic = "PNW1";

void need(std::string_view bytes, std::size_t offset, std::size_t count, const char* what) {
  if (offset + count > bytes.size())
    throw Error(ErrorCode::truncated, std::string("weight file truncated while reading ") + what);
}

WeightFile parse_body(std::string_view bytes) {
  std::size_t pos = kMagic.size();
  need(bytes, pos, 4, "config length");
  const std::uint32_t json_len = get_u32(bytes, pos);
  pos += 4;
  need(bytes, pos, json_len, "config");

  WeightFile file;
  try {
    file.config = config_from_json(nlohmann::json::parse(bytes.substr(pos, json_len)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format, std::string("weight file config: ") + e.what());
  }
  pos += json_len;

  file.weights = zero_weights(file.config);
  for (LayerParams& layer : file.weights.layers) {
    if (layer.weights.size() == 0 && layer.biases.size() == 0) continue;
    need(bytes, pos, 8, "array lengths");
    const std::uint32_t nw = get_u32(bytes, pos), nb = get_u32(bytes, pos + 4);
    pos += 8;
    if (nw != layer.weights.size() || nb != layer.biases.size())
      throw Error(ErrorCode::format, "weight file array lengths disagree with its config");
    need(bytes, pos, 4ull * (nw + nb), "parameters");
    for (auto& w : layer.weights) w = get_f32(bytes, pos), pos += 4;
    for (auto& b : layer.biases) b = get_f32(bytes, pos), pos += 4;
  }
  need(bytes, pos, 4, "checksum");
  if (bytes.size() != pos + 4) throw Error(ErrorCode::format, "trailing bytes after checksum");
  return file;
}

}  // namespace

std::string encode_weights(const NetworkConfig& cfg, const WeightSet& weights) {
  check_weights(cfg, weights);
  const std::string json = canonical_config_json(cfg);
  std::string out(kMagic);
  put_u32(out, std::uint32_t(json.size()));
  out += json;
  for (const LayerParams& layer : weights.layers) {
    if (layer.weights.size() == 0 && layer.biases.size() == 0) continue;  // normalization
    put_u32(out, std::uint32_t(layer.weights.size()));
    put_u32(out, std::uint32_t(layer.biases.size()));
    for (float w : layer.weights) put_f32(out, w);
    for (float b : layer.biases) put_f32(out, b);
  }
  put_u32(out, crc32(out));
  return out;
}

WeightFile decode_weights(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
    throw Error(ErrorCode::format, "not a weight file (bad magic)");
  const bool crc_ok = bytes.size() >= kMagic.size() + 8 &&
                      get_u32(bytes, bytes.size() - 4) == crc32(bytes.substr(0, bytes.size() - 4));
  WeightFile file;
  try {
    file = parse_body(bytes);
  } catch (const Error& e) {
    // A damaged body usually surfaces as a parse failure; report what caused it.
    const bool parse_failure = e.code() == ErrorCode::format || e.code() == ErrorCode::config;
    if (parse_failure && !crc_ok) throw Error(ErrorCode::checksum, "weight file checksum mismatch");
    throw;
  }
  if (!crc_ok) throw Error(ErrorCode::checksum, "weight file checksum mismatch");
  return file;
}

void save_weights(const NetworkConfig& cfg, const WeightSet& weights, const std::string& path) {
  write_file_atomic(path, encode_weights(cfg, weights));
}

WeightFile load_weights(const std::string& path) { return decode_weights(read_file(path)); }

}  // namespace visback
