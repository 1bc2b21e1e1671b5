#include "visback/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "visback/rng.hpp"

namespace visback {

std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::shape: return "shape";
    case ErrorCode::config: return "config";
    case ErrorCode::range: return "range";
    case ErrorCode::format: return "format";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::checksum: return "checksum";
    case ErrorCode::io: return "io";
    case ErrorCode::numerical: return "numerical";
  }
  return "unknown";
}

NetworkConfig NetworkConfig::pilotnet() {
  NetworkConfig cfg;
  cfg.layers = {
      LayerSpec::normalization(),
      LayerSpec::conv(5, 2, 24),
      LayerSpec::conv(5, 2, 36),
      LayerSpec::conv(5, 2, 48),
      LayerSpec::conv(3, 1, 64),
      LayerSpec::conv(3, 1, 64),
      LayerSpec::dense(100),
      LayerSpec::dense(50),
      LayerSpec::dense(10),
      LayerSpec::dense(1, Activation::none),
  };
  validate_config(cfg);
  return cfg;
}

namespace {

[[noreturn]] void config_error(int layer, const std::string& msg) {
  throw Error(ErrorCode::config, "layer " + std::to_string(layer) + ": " + msg);
}

}  // namespace

ShapeTable validate_config(NetworkConfig& cfg) {
  if (cfg.input_channels < 1 || cfg.input_height < 1 || cfg.input_width < 1)
    throw Error(ErrorCode::config, "input dimensions must be >= 1");
  if (cfg.layers.empty() || cfg.layers.front().kind != LayerKind::normalization)
    config_error(0, "the first layer must be the normalization layer");

  ShapeTable table;
  table.input = cfg.input_shape();
  Shape current = table.input;
  bool seen_fc = false;
  for (int i = 0; i < int(cfg.layers.size()); ++i) {
    LayerSpec& layer = cfg.layers[i];
    switch (layer.kind) {
      case LayerKind::normalization:
        if (i != 0) config_error(i, "normalization may only appear first");
        break;
      case LayerKind::conv: {
        if (seen_fc) config_error(i, "conv layer after a fully connected layer");
        ConvGeometry& g = layer.geometry;
        if (g.kernel_h < 1 || g.kernel_w < 1 || g.stride_h < 1 || g.stride_w < 1 || g.out_channels < 1)
          config_error(i, "kernel, stride and out_channels must be >= 1");
        if (g.in_channels == 0) g.in_channels = current.channels;
        if (g.in_channels != current.channels)
          config_error(i, "in_channels " + std::to_string(g.in_channels) + " but previous layer has " +
                              std::to_string(current.channels) + " channels");
        if (current.height < g.kernel_h || current.width < g.kernel_w)
          config_error(i, "kernel " + std::to_string(g.kernel_h) + "x" + std::to_string(g.kernel_w) +
                              " exceeds input " + std::to_string(current.height) + "x" +
                              std::to_string(current.width));
        current = {g.out_channels, conv_output_extent(current.height, g.kernel_h, g.stride_h),
                   conv_output_extent(current.width, g.kernel_w, g.stride_w)};
        table.conv_layers.push_back(i);
        table.trainable_layers.push_back(i);
        break;
      }
      case LayerKind::fully_connected:
        if (table.conv_layers.empty()) config_error(i, "at least one conv layer must precede the fully connected head");
        if (layer.units < 1) config_error(i, "units must be >= 1");
        seen_fc = true;
        current = {layer.units, 1, 1};
        table.trainable_layers.push_back(i);
        break;
    }
    table.outputs.push_back(current);
  }
  const LayerSpec& last = cfg.layers.back();
  if (last.kind != LayerKind::fully_connected || last.units != 1)
    config_error(int(cfg.layers.size()) - 1, "the last layer must be fully connected with exactly 1 unit");
  return table;
}

ShapeTable validate_config(const NetworkConfig& cfg) {
  NetworkConfig copy = cfg;
  return validate_config(copy);
}

namespace {

long fan_in(const LayerSpec& layer, const Shape& input) {
  if (layer.kind == LayerKind::conv) return layer.geometry.patch_size();
  return input.size();
}

long weight_count(const LayerSpec& layer, const Shape& input) {
  switch (layer.kind) {
    case LayerKind::normalization: return 0;
    case LayerKind::conv: return layer.geometry.weight_count();
    case LayerKind::fully_connected: return long(layer.units) * input.size();
  }
  return 0;
}

long bias_count(const LayerSpec& layer) {
  switch (layer.kind) {
    case LayerKind::normalization: return 0;
    case LayerKind::conv: return layer.geometry.out_channels;
    case LayerKind::fully_connected: return layer.units;
  }
  return 0;
}

Shape layer_input(const ShapeTable& t, int i) { return i == 0 ? t.input : t.outputs[i - 1]; }

}  // namespace

long WeightSet::parameter_count() const {
  long n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

bool operator==(const WeightSet& a, const WeightSet& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weights.size() != b.layers[i].weights.size() ||
        a.layers[i].biases.size() != b.layers[i].biases.size())
      return false;
    if (a.layers[i].weights != b.layers[i].weights || a.layers[i].biases != b.layers[i].biases) return false;
  }
  return true;
}

WeightSet zero_weights(const NetworkConfig& cfg) {
  NetworkConfig resolved = cfg;
  const ShapeTable table = validate_config(resolved);
  WeightSet ws;
  ws.layers.resize(resolved.layers.size());
  for (int i = 0; i < int(resolved.layers.size()); ++i) {
    ws.layers[i].weights = Eigen::VectorXf::Zero(weight_count(resolved.layers[i], layer_input(table, i)));
    ws.layers[i].biases = Eigen::VectorXf::Zero(bias_count(resolved.layers[i]));
  }
  return ws;
}

WeightSet init_weights(const NetworkConfig& cfg, std::uint64_t seed) {
  NetworkConfig resolved = cfg;
  const ShapeTable table = validate_config(resolved);
  WeightSet ws = zero_weights(resolved);
  Rng rng(seed);
  for (int i : table.trainable_layers) {
    const double s = std::sqrt(6.0 / double(fan_in(resolved.layers[i], layer_input(table, i))));
    for (auto& w : ws.layers[i].weights) w = float(rng.uniform(-s, s));
  }
  return ws;
}

void check_weights(const NetworkConfig& cfg, const WeightSet& weights) {
  NetworkConfig resolved = cfg;
  const ShapeTable table = validate_config(resolved);
  if (weights.layers.size() != resolved.layers.size())
    throw Error(ErrorCode::config, "weight set has " + std::to_string(weights.layers.size()) +
                                       " layers, config has " + std::to_string(resolved.layers.size()));
  for (int i = 0; i < int(resolved.layers.size()); ++i) {
    const long nw = weight_count(resolved.layers[i], layer_input(table, i));
    const long nb = bias_count(resolved.layers[i]);
    if (weights.layers[i].weights.size() != nw || weights.layers[i].biases.size() != nb)
      config_error(i, "expected " + std::to_string(nw) + " weights and " + std::to_string(nb) + " biases, got " +
                          std::to_string(weights.layers[i].weights.size()) + " and " +
                          std::to_string(weights.layers[i].biases.size()));
  }
}

Tensorf normalize_input(const Tensorf& image_yuv) {
  const float lo = image_yuv.values().minCoeff();
  const float hi = image_yuv.values().maxCoeff();
  if (!(lo >= 0.0f && hi <= 255.0f))
    throw Error(ErrorCode::range, "normalize_input: pixel values must lie in [0, 255] (got range [" +
                                      std::to_string(lo) + ", " + std::to_string(hi) + "])");
  Tensorf out(image_yuv.shape());
  out.values() = image_yuv.values().array() / 127.5f - 1.0f;
  return out;
}

namespace {

// Per-layer intermediate values kept for the backward pass.
struct LayerCache {
  RowMatrix<float> col;       // conv: im2col of the layer input
  Tensorf output;             // conv: post-activation maps
  Eigen::VectorXf fc_input;   // fc: flattened input
  Eigen::VectorXf fc_output;  // fc: post-activation
};

struct Pass {
  NetworkConfig cfg;
  ShapeTable table;
  std::vector<LayerCache> cache;
  ActivationTrace trace;
  float output = 0.0f;
};

void apply_activation(Activation act, Eigen::Ref<Eigen::VectorXf> v) {
  if (act == Activation::relu) v = v.cwiseMax(0.0f);
}

void run_forward(Pass& pass, const WeightSet& weights, const Tensorf& image, bool keep_cache) {
  const NetworkConfig& cfg = pass.cfg;
  detail::check_same_shape(cfg.input_shape(), image.shape(), "forward input");
  check_weights(cfg, weights);
  if (keep_cache) pass.cache.resize(cfg.layers.size());

  Tensorf maps;
  Eigen::VectorXf vec;
  for (int i = 0; i < int(cfg.layers.size()); ++i) {
    const LayerSpec& layer = cfg.layers[i];
    const LayerParams& p = weights.layers[i];
    switch (layer.kind) {
      case LayerKind::normalization:
        maps = normalize_input(image);
        pass.trace.entries.push_back({i, maps});
        break;
      case LayerKind::conv: {
        const ConvGeometry& g = layer.geometry;
        RowMatrix<float> col = im2col(maps, g);
        Tensorf out(g.out_channels, conv_output_extent(maps.height(), g.kernel_h, g.stride_h),
                    conv_output_extent(maps.width(), g.kernel_w, g.stride_w));
        Eigen::Map<const RowMatrix<float>> w(p.weights.data(), g.out_channels, g.patch_size());
        auto planes = out.planes();
        planes.noalias() = w * col;
        planes.colwise() += p.biases;
        apply_activation(layer.activation, out.values());
        if (keep_cache) {
          pass.cache[i].col = std::move(col);
          pass.cache[i].output = out;
        }
        pass.trace.entries.push_back({i, out});
        maps = std::move(out);
        break;
      }
      case LayerKind::fully_connected: {
        if (cfg.layers[i - 1].kind == LayerKind::conv) vec = maps.values();
        Eigen::Map<const RowMatrix<float>> w(p.weights.data(), layer.units, vec.size());
        Eigen::VectorXf out = fully_connected<float>(vec, w, p.biases);
        apply_activation(layer.activation, out);
        if (keep_cache) {
          pass.cache[i].fc_input = vec;
          pass.cache[i].fc_output = out;
        }
        vec = std::move(out);
        break;
      }
    }
  }
  pass.output = vec[0];
}

}  // namespace

ForwardResult forward(const NetworkConfig& cfg, const WeightSet& weights, const Tensorf& image_yuv) {
  Pass pass;
  pass.cfg = cfg;
  pass.table = validate_config(pass.cfg);
  run_forward(pass, weights, image_yuv, false);
  if (!std::isfinite(pass.output)) throw Error(ErrorCode::numerical, "forward: non-finite network output");
  return {{pass.output}, std::move(pass.trace)};
}

Gradient backward(const NetworkConfig& cfg, const WeightSet& weights, const Tensorf& image_yuv, float target) {
  Pass pass;
  pass.cfg = cfg;
  pass.table = validate_config(pass.cfg);
  run_forward(pass, weights, image_yuv, true);

  Gradient result;
  result.prediction = pass.output;
  const float err = pass.output - target;
  result.loss = err * err;
  result.grads = zero_weights(pass.cfg);

  const auto& layers = pass.cfg.layers;
  const int first_conv = pass.table.conv_layers.front();
  Eigen::VectorXf grad_vec = Eigen::VectorXf::Constant(1, 2.0f * err);  // dLoss/d(output)
  Tensorf grad_maps;

  for (int i = int(layers.size()) - 1; i > 0; --i) {
    const LayerSpec& layer = layers[i];
    const LayerParams& p = weights.layers[i];
    LayerParams& g = result.grads.layers[i];
    const LayerCache& c = pass.cache[i];
    if (layer.kind == LayerKind::fully_connected) {
      Eigen::VectorXf delta = grad_vec;
      if (layer.activation == Activation::relu)
        delta = (c.fc_output.array() > 0.0f).select(delta, 0.0f);
      Eigen::Map<const RowMatrix<float>> w(p.weights.data(), layer.units, c.fc_input.size());
      Eigen::Map<RowMatrix<float>> gw(g.weights.data(), layer.units, c.fc_input.size());
      gw.noalias() = delta * c.fc_input.transpose();
      g.biases = delta;
      grad_vec.noalias() = w.transpose() * delta;
      if (layers[i - 1].kind == LayerKind::conv) {
        grad_maps = Tensorf(pass.table.outputs[i - 1]);
        grad_maps.values() = grad_vec;
      }
    } else {
      const ConvGeometry& geo = layer.geometry;
      if (layer.activation == Activation::relu)
        grad_maps.values() = (c.output.values().array() > 0.0f).select(grad_maps.values(), 0.0f);
      auto delta = grad_maps.planes();
      Eigen::Map<RowMatrix<float>> gw(g.weights.data(), geo.out_channels, geo.patch_size());
      gw.noalias() = delta * c.col.transpose();
      g.biases = delta.rowwise().sum();
      if (i == first_conv) break;
      Eigen::Map<const RowMatrix<float>> w(p.weights.data(), geo.out_channels, geo.patch_size());
      RowMatrix<float> grad_col = w.transpose() * delta;
      Tensorf grad_in(pass.table.outputs[i - 1]);
      col2im_add(grad_col, geo, grad_in);
      grad_maps = std::move(grad_in);
    }
  }
  if (!std::isfinite(result.loss)) throw Error(ErrorCode::numerical, "backward: non-finite loss");
  return result;
}

// ---------------------------------------------------------------------------
// Config JSON

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::normalization: return "normalization";
    case LayerKind::conv: return "conv";
    case LayerKind::fully_connected: return "fully_connected";
  }
  return "?";
}

}  // namespace

nlohmann::json config_to_json(const NetworkConfig& cfg) {
  NetworkConfig resolved = cfg;
  validate_config(resolved);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : resolved.layers) {
    nlohmann::json j;
    j["kind"] = kind_name(l.kind);
    if (l.kind == LayerKind::conv) {
      j["kernel_h"] = l.geometry.kernel_h;
      j["kernel_w"] = l.geometry.kernel_w;
      j["stride_h"] = l.geometry.stride_h;
      j["stride_w"] = l.geometry.stride_w;
      j["in_channels"] = l.geometry.in_channels;
      j["out_channels"] = l.geometry.out_channels;
    }
    if (l.kind == LayerKind::fully_connected) j["units"] = l.units;
    if (l.kind != LayerKind::normalization) j["activation"] = l.activation == Activation::relu ? "relu" : "none";
    layers.push_back(std::move(j));
  }
  return {{"input_channels", resolved.input_channels},
          {"input_height", resolved.input_height},
          {"input_width", resolved.input_width},
          {"layers", std::move(layers)}};
}

NetworkConfig config_from_json(const nlohmann::json& j) {
  try {
    NetworkConfig cfg;
    cfg.input_channels = j.value("input_channels", 3);
    cfg.input_height = j.at("input_height").get<int>();
    cfg.input_width = j.at("input_width").get<int>();
    for (const auto& lj : j.at("layers")) {
      const std::string kind = lj.at("kind").get<std::string>();
      LayerSpec l;
      if (kind == "normalization") {
        l = LayerSpec::normalization();
      } else if (kind == "conv") {
        l.kind = LayerKind::conv;
        const int k = lj.value("kernel", 0), s = lj.value("stride", 1);
        l.geometry.kernel_h = lj.value("kernel_h", k);
        l.geometry.kernel_w = lj.value("kernel_w", k);
        l.geometry.stride_h = lj.value("stride_h", s);
        l.geometry.stride_w = lj.value("stride_w", s);
        l.geometry.in_channels = lj.value("in_channels", 0);
        l.geometry.out_channels = lj.at("out_channels").get<int>();
      } else if (kind == "fully_connected") {
        l.kind = LayerKind::fully_connected;
        l.units = lj.at("units").get<int>();
      } else {
        throw Error(ErrorCode::config, "unknown layer kind '" + kind + "'");
      }
      if (l.kind != LayerKind::normalization) {
        const std::string act = lj.value("activation", l.kind == LayerKind::fully_connected && l.units == 1 &&
                                                               &lj == &j.at("layers").back()
                                                           ? "none"
                                                           : "relu");
        if (act == "relu") l.activation = Activation::relu;
        else if (act == "none") l.activation = Activation::none;
        else throw Error(ErrorCode::config, "unknown activation '" + act + "'");
      }
      cfg.layers.push_back(l);
    }
    validate_config(cfg);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format, std::string("config JSON: ") + e.what());
  }
}

std::string canonical_config_json(const NetworkConfig& cfg) { return config_to_json(cfg).dump(); }

NetworkConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format, "config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

}  // namespace visback
