#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tiny_nets.hpp"
#include "visback/image_io.hpp"
#include "visback/saliency.hpp"

using namespace visback;

namespace {

NetworkConfig two_level(int in_h, int in_w, int k1, int s1, int k2, int s2, int c1 = 1, int c2 = 1) {
  NetworkConfig cfg;
  cfg.input_channels = 1;
  cfg.input_height = in_h;
  cfg.input_width = in_w;
  cfg.layers = {LayerSpec::normalization(), LayerSpec::conv(k1, s1, c1), LayerSpec::conv(k2, s2, c2),
                LayerSpec::dense(1, Activation::none)};
  return cfg;
}

ActivationTrace hand_trace(const NetworkConfig& cfg, std::vector<Tensorf> maps) {
  ActivationTrace t;
  t.entries.push_back({0, Tensorf(cfg.input_shape())});
  int layer = 1;
  for (auto& m : maps) t.entries.push_back({layer++, std::move(m)});
  return t;
}

}  // namespace

TEST_CASE("mask has input dims and lies in [0, 1]") {
  const NetworkConfig cfg = NetworkConfig::pilotnet();
  std::mt19937 gen(1);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const WeightSet ws = init_weights(cfg, seed);
    const MaskResult r = compute_mask(forward(cfg, ws, tiny::random_image(gen, cfg)).trace, cfg);
    CHECK(r.mask.values.shape() == Shape{1, 66, 200});
    CHECK(r.mask.values.values().minCoeff() >= 0.0f);
    CHECK(r.mask.values.values().maxCoeff() <= 1.0f);
    // intermediate masks telescope through the conv shapes
    const ShapeTable t = validate_config(cfg);
    REQUIRE(r.trace.levels.size() == t.conv_layers.size());
    for (std::size_t k = 0; k < t.conv_layers.size(); ++k) {
      const Shape s = t.outputs[std::size_t(t.conv_layers[k])];
      CHECK(r.trace.levels[k].shape() == Shape{1, s.height, s.width});
    }
  }
}

TEST_CASE("unit top level leaves the ramp below unchanged") {
  const NetworkConfig cfg = two_level(5, 5, 3, 1, 3, 1);
  Tensorf ramp(1, 3, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) ramp(0, y, x) = float(y * 3 + x);
  const MaskResult r = compute_mask(hand_trace(cfg, {ramp, Tensorf(1, 1, 1, 1.0f)}), cfg);
  CHECK(r.trace.levels[1] == Tensorf(1, 1, 1, 1.0f));
  CHECK(r.trace.levels[0] == ramp);
}

TEST_CASE("mask matches the straight-loop oracle") {
  std::mt19937 gen(2);
  for (int trial = 0; trial < 30; ++trial) {
    const NetworkConfig cfg = tiny::random_config(gen);
    const WeightSet ws = tiny::random_weights(gen, cfg);
    const ActivationTrace trace = forward(cfg, ws, tiny::random_image(gen, cfg)).trace;
    const Tensorf mask = compute_mask(trace, cfg).mask.values;
    const oracle::Grid ref = oracle::salient_mask(trace, cfg);
    REQUIRE(mask.shape() == Shape{1, ref.h, ref.w});
    for (std::size_t i = 0; i < ref.v.size(); ++i) CHECK(std::abs(mask.values()[long(i)] - ref.v[i]) <= 1e-5);
  }
}

TEST_CASE("uniform activation scaling leaves the mask unchanged") {
  const NetworkConfig cfg = NetworkConfig::pilotnet();
  std::mt19937 gen(3);
  const ActivationTrace trace = forward(cfg, init_weights(cfg, 5), tiny::random_image(gen, cfg)).trace;
  const Tensorf base = compute_mask(trace, cfg).mask.values;
  for (float lambda : {0.1f, 3.0f, 10.0f}) {
    ActivationTrace scaled = trace;
    for (std::size_t k = 1; k < scaled.entries.size(); ++k) scaled.entries[k].activation.values() *= lambda;
    const Tensorf m = compute_mask(scaled, cfg).mask.values;
    CHECK((m.values() - base.values()).cwiseAbs().maxCoeff() <= 1e-6f);
  }
}

TEST_CASE("single activation maps to exactly its forward footprint") {
  NetworkConfig cfg;
  cfg.input_channels = 2;
  cfg.input_height = 11;
  cfg.input_width = 13;
  cfg.layers = {LayerSpec::normalization(), LayerSpec::conv(3, 2, 4), LayerSpec::dense(1, Activation::none)};
  // conv output is 5x6
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 6; ++j) {
      Tensorf maps(4, 5, 6);
      maps(2, i, j) = 0.8f;
      const Tensorf m = compute_mask(hand_trace(cfg, {maps}), cfg).mask.values;
      for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 13; ++x) {
          const bool inside = y >= 2 * i && y < 2 * i + 3 && x >= 2 * j && x < 2 * j + 3;
          REQUIRE(m(0, y, x) == (inside ? 1.0f : 0.0f));
        }
    }
}

TEST_CASE("all-zero activations give an all-zero mask") {
  const NetworkConfig cfg = two_level(9, 9, 3, 2, 2, 1, 3, 2);
  const MaskResult r = compute_mask(hand_trace(cfg, {Tensorf(3, 4, 4), Tensorf(2, 3, 3)}), cfg);
  CHECK(r.mask.values == Tensorf(1, 9, 9));
}

TEST_CASE("trace/config mismatches are rejected") {
  const NetworkConfig cfg = two_level(9, 9, 3, 2, 2, 1, 3, 2);
  CHECK_THROWS_AS(compute_mask(hand_trace(cfg, {Tensorf(3, 4, 4)}), cfg), Error);
  CHECK_THROWS_AS(compute_mask(hand_trace(cfg, {Tensorf(3, 4, 4), Tensorf(2, 3, 4)}), cfg), ShapeError);
  CHECK_THROWS_AS(compute_mask(hand_trace(cfg, {Tensorf(2, 4, 4), Tensorf(2, 3, 3)}), cfg), ShapeError);
  ActivationTrace wrong_index = hand_trace(cfg, {Tensorf(3, 4, 4), Tensorf(2, 3, 3)});
  wrong_index.entries[2].layer_index = 3;
  CHECK_THROWS_AS(compute_mask(wrong_index, cfg), Error);
}

TEST_CASE("overlay") {
  std::mt19937 gen(4);
  Tensorf rgb(3, 4, 5);
  std::uniform_int_distribution<int> d(0, 200);
  for (auto& x : rgb.values()) x = float(d(gen));

  CHECK(overlay(rgb, {Tensorf(1, 4, 5)}) == rgb);

  const Tensorf full = overlay(rgb, {Tensorf(1, 4, 5, 1.0f)});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) {
      CHECK(full(1, y, x) == 255.0f);
      CHECK(full(0, y, x) == rgb(0, y, x));
      CHECK(full(2, y, x) == rgb(2, y, x));
    }

  VisualizationMask half{Tensorf(1, 4, 5)};
  half.values(0, 2, 3) = 0.5f;
  rgb(1, 2, 3) = 100.0f;
  Tensorf out = overlay(rgb, half, 100.0f);
  CHECK(out(1, 2, 3) == 150.0f);
  rgb(1, 2, 3) = 230.0f;
  out = overlay(rgb, half, 100.0f);
  CHECK(out(1, 2, 3) == 255.0f);
  CHECK(out(1, 0, 0) == rgb(1, 0, 0));

  CHECK_THROWS_AS(overlay(rgb, {Tensorf(1, 4, 6)}), ShapeError);
}

TEST_CASE("mask exports") {
  VisualizationMask m{Tensorf(1, 2, 3)};
  m.values(0, 0, 1) = 0.5f;
  m.values(0, 1, 2) = 1.0f;
  const Tensorf pgm = decode_pnm(encode_mask_pgm(m));
  CHECK(pgm(0, 0, 0) == 0.0f);
  CHECK(pgm(0, 0, 1) == 128.0f);
  CHECK(pgm(0, 1, 2) == 255.0f);

  const std::string raw = encode_mask_raw(m);
  CHECK(raw.substr(0, 4) == "MSK1");
  CHECK(raw.size() == 12 + 4 * 6);
  CHECK(decode_mask_raw(raw).values == m.values);
  CHECK_THROWS_AS(decode_mask_raw(raw.substr(0, raw.size() - 1)), Error);
  std::string bad = raw;
  bad[0] = 'N';
  CHECK_THROWS_AS(decode_mask_raw(bad), Error);
}
