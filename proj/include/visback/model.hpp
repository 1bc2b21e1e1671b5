#pragma once

// Steering network: a fixed input normalizer, a stack of valid-padding
// convolutions and a fully connected head ending in one output neuron that
// predicts the inverse turning radius (1/m).

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "visback/tensor.hpp"

namespace visback {

enum class LayerKind { normalization, conv, fully_connected };
enum class Activation { relu, none };

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  ConvGeometry geometry;  // conv only; in_channels is filled in from the chain
  int units = 0;          // fully_connected only
  Activation activation = Activation::relu;

  static LayerSpec normalization() { return {LayerKind::normalization, {}, 0, Activation::none}; }
  static LayerSpec conv(int kernel, int stride, int out_channels, Activation act = Activation::relu) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.geometry = {kernel, kernel, stride, stride, 0, out_channels};
    s.activation = act;
    return s;
  }
  static LayerSpec dense(int units, Activation act = Activation::relu) {
    return {LayerKind::fully_connected, {}, units, act};
  }
};

struct NetworkConfig {
  int input_channels = 3;
  int input_height = 66;
  int input_width = 200;
  std::vector<LayerSpec> layers;

  Shape input_shape() const { return {input_channels, input_height, input_width}; }

  /// Input 3x66x200; conv 24/36/48 (5x5, stride 2), conv 64/64 (3x3); FC 100-50-10-1.
  static NetworkConfig pilotnet();
};

/// Output shape of every layer (FC layers report units x 1 x 1).
struct ShapeTable {
  Shape input;
  std::vector<Shape> outputs;
  std::vector<int> conv_layers;  // indices into NetworkConfig::layers, bottom to top
  std::vector<int> trainable_layers;
};

/// Checks the layer ordering invariants and the shape chain; fills in each
/// conv layer's in_channels. Throws Error(config) naming the offending layer.
ShapeTable validate_config(NetworkConfig& cfg);
ShapeTable validate_config(const NetworkConfig& cfg);

struct LayerParams {
  Eigen::VectorXf weights;
  Eigen::VectorXf biases;
};

/// One entry per config layer; the normalization layer's entry stays empty.
struct WeightSet {
  std::vector<LayerParams> layers;

  long parameter_count() const;
  friend bool operator==(const WeightSet& a, const WeightSet& b);
};

/// Zero-valued weights with the sizes the config implies.
WeightSet zero_weights(const NetworkConfig& cfg);

/// Weights uniform in [-sqrt(6/fan_in), sqrt(6/fan_in)], biases zero.
WeightSet init_weights(const NetworkConfig& cfg, std::uint64_t seed);

/// Throws Error(config) when any array length disagrees with the config.
void check_weights(const NetworkConfig& cfg, const WeightSet& weights);

struct TraceEntry {
  int layer_index = 0;
  Tensorf activation;
};

/// entries[0] is the normalized input (layer 0); then one entry per conv layer
/// holding its post-activation feature maps.
struct ActivationTrace {
  std::vector<TraceEntry> entries;
};

struct SteeringOutput {
  float inverse_turning_radius = 0.0f;
};

struct ForwardResult {
  SteeringOutput steering;
  ActivationTrace trace;
};

/// x / 127.5 - 1. Values outside [0, 255] are rejected.
Tensorf normalize_input(const Tensorf& image_yuv);

ForwardResult forward(const NetworkConfig& cfg, const WeightSet& weights, const Tensorf& image_yuv);

struct Gradient {
  WeightSet grads;
  float loss = 0.0f;
  float prediction = 0.0f;
};

/// Squared error (prediction - target)^2 and its gradient w.r.t. every trainable parameter.
Gradient backward(const NetworkConfig& cfg, const WeightSet& weights, const Tensorf& image_yuv, float target);

// Config (de)serialization. Schema documented in docs/formats.md.
nlohmann::json config_to_json(const NetworkConfig& cfg);
NetworkConfig config_from_json(const nlohmann::json& j);
std::string canonical_config_json(const NetworkConfig& cfg);
NetworkConfig load_config(const std::string& path);

}  // namespace visback
