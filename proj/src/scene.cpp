#include "visback/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "visback/image_io.hpp"

namespace visback {

const char* to_string(SceneStyle style) {
  switch (style) {
    case SceneStyle::lane_marked: return "lane_marked";
    case SceneStyle::unmarked_with_parked_cars: return "unmarked_with_parked_cars";
    case SceneStyle::grass_edge: return "grass_edge";
  }
  return "?";
}

SceneStyle scene_style_from_string(const std::string& name) {
  if (name == "lane_marked") return SceneStyle::lane_marked;
  if (name == "unmarked_with_parked_cars") return SceneStyle::unmarked_with_parked_cars;
  if (name == "grass_edge") return SceneStyle::grass_edge;
  throw Error(ErrorCode::range, "unknown scene style '" + name + "'");
}

SceneParams sample_scene(Rng& rng, SceneStyle style) {
  SceneParams p;
  p.lane_offset = rng.uniform(-0.8, 0.8);
  p.heading = rng.uniform(-0.06, 0.06);
  p.curvature = rng.uniform(-0.02, 0.02);
  p.style = style;
  p.seed = rng.next();
  return p;
}

namespace {

using Rgb = std::array<double, 3>;

constexpr double kCameraHeight = 1.5;
constexpr double kHalfFov = 35.0 * std::numbers::pi / 180.0;
constexpr double kHorizonFraction = 0.18;
constexpr int kSupersample = 3;

struct Camera {
  double f, cx, horizon;
  Camera(int w, int h) : f(w / (2.0 * std::tan(kHalfFov))), cx(w / 2.0), horizon(kHorizonFraction * h) {}
};

double hash01(std::int64_t i, std::int64_t j, std::uint64_t seed) {
  const std::uint64_t k = mix_seed(seed ^ mix_seed(std::uint64_t(i) * 0x9e3779b1ULL + std::uint64_t(j) * 0x85ebca77ULL));
  return double(k >> 11) * 0x1.0p-53;
}

// Bilinear lattice noise in [0, 1).
double value_noise(double x, double z, double cell, std::uint64_t seed) {
  const double gx = x / cell, gz = z / cell;
  const double fx = std::floor(gx), fz = std::floor(gz);
  const double tx = gx - fx, tz = gz - fz;
  const auto ix = std::int64_t(fx), iz = std::int64_t(fz);
  const double a = hash01(ix, iz, seed), b = hash01(ix + 1, iz, seed);
  const double c = hash01(ix, iz + 1, seed), d = hash01(ix + 1, iz + 1, seed);
  return (a * (1 - tx) + b * tx) * (1 - tz) + (c * (1 - tx) + d * tx) * tz;
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

Rgb scale(const Rgb& c, double s) { return {c[0] * s, c[1] * s, c[2] * s}; }

struct ParkedCar {
  double z;        // rear face distance
  double lateral;  // centre, relative to the lane centre
  Rgb body;
};

// Per-scene appearance drawn from the scene seed; geometry comes from SceneParams.
class SceneModel {
 public:
  SceneModel(const SceneParams& p, int w, int h) : p_(p), cam_(w, h), height_(h) {
    Rng rng(mix_seed(p.seed));
    asphalt_ = rng.uniform(75.0, 110.0);
    const double g = rng.uniform(0.8, 1.2);
    grass_ = {70.0 * g, 120.0 * g, 50.0 * g};
    dirt_ = {rng.uniform(120, 150), rng.uniform(110, 130), rng.uniform(80, 100)};
    sky_ = rng.uniform(0.9, 1.1);
    dashed_right_ = rng.coin();
    dash_phase_ = rng.uniform(0.0, 9.0);
    edge_jitter_ = rng.uniform(0.1, 0.35);
    if (p.style == SceneStyle::unmarked_with_parked_cars) {
      const int sides = int(rng.below(3));  // 0 left, 1 right, 2 both
      for (int side = 0; side < 2; ++side) {
        if (sides != 2 && sides != side) continue;
        const double sign = side == 0 ? -1.0 : 1.0;
        for (double z = rng.uniform(6.0, 14.0); z < 70.0; z += rng.uniform(6.5, 11.0)) {
          const double shade = rng.uniform(0.3, 1.0);
          const Rgb palette[] = {{180, 30, 30}, {30, 60, 160}, {200, 200, 205}, {40, 40, 45}, {170, 150, 40}};
          cars_.push_back({z, sign * (kLaneWidth / 2 + 1.3), scale(palette[rng.below(5)], shade)});
        }
      }
      std::sort(cars_.begin(), cars_.end(), [](const ParkedCar& a, const ParkedCar& b) { return a.z < b.z; });
    }
  }

  Rgb sample(double u, double v) const {
    for (const ParkedCar& car : cars_)
      if (auto c = car_face(car, u, v)) return *c;
    if (v <= cam_.horizon) return sky(u, v);
    const double z = cam_.f * kCameraHeight / (v - cam_.horizon);
    const double x = (u - cam_.cx) * z / cam_.f;
    Rgb c = ground(x - lane_centre(z), z);
    const double fog = std::clamp((z - 35.0) / 80.0, 0.0, 0.75);
    return mix(c, {175, 185, 195}, fog);
  }

 private:
  double lane_centre(double z) const { return -p_.lane_offset - p_.heading * z + 0.5 * p_.curvature * z * z; }

  Rgb sky(double u, double v) const {
    const double azimuth = std::atan((u - cam_.cx) / cam_.f) + p_.heading;
    const double tree_top = cam_.horizon - height_ / 66.0 * (1.0 + 4.0 * value_noise(azimuth, 0.0, 0.05, p_.seed ^ 7));
    if (v > tree_top) return scale({40, 70, 35}, 0.8 + 0.4 * value_noise(azimuth, v, 0.01, p_.seed ^ 11));
    const double t = std::clamp(v / std::max(cam_.horizon, 1.0), 0.0, 1.0);
    return scale(mix({110, 150, 220}, {200, 215, 235}, t), sky_);
  }

  Rgb asphalt(double d, double z) const {
    const double n = value_noise(d, z, 0.35, p_.seed ^ 1) - 0.5;
    const double a = asphalt_ + 14.0 * n;
    return {a, a, a * 1.04};
  }

  Rgb grass(double d, double z) const {
    const double n = value_noise(d, z, 0.25, p_.seed ^ 2) - 0.5;
    return scale(grass_, 1.0 + 0.5 * n);
  }

  Rgb ground(double d, double z) const {
    const double half = kLaneWidth / 2;
    switch (p_.style) {
      case SceneStyle::lane_marked: {
        const double line = 0.15;
        if (std::abs(d + half) < line / 2 && (dashed_right_ || dashed(z))) return {235, 235, 225};
        if (std::abs(d - half) < line / 2 && (!dashed_right_ || dashed(z))) return {235, 235, 225};
        if (std::abs(d) < half + 0.7) return asphalt(d, z);
        return mix(dirt_, grass(d, z), std::clamp((std::abs(d) - half - 0.7) / 1.5, 0.0, 1.0));
      }
      case SceneStyle::unmarked_with_parked_cars: {
        for (const ParkedCar& car : cars_)
          if (std::abs(d - car.lateral) < 1.0 && z > car.z - 0.3 && z < car.z + 4.2) return {25, 25, 28};
        if (std::abs(d) < half + 2.6) return asphalt(d, z);
        return scale({165, 165, 160}, 1.0 + 0.2 * (value_noise(d, z, 0.5, p_.seed ^ 3) - 0.5));
      }
      case SceneStyle::grass_edge: {
        const double edge = half + edge_jitter_ * (value_noise(0.0, z, 1.5, p_.seed ^ 4) - 0.5);
        if (std::abs(d) < edge) return asphalt(d, z);
        return grass(d, z);
      }
    }
    return {0, 0, 0};
  }

  bool dashed(double z) const { return std::fmod(z + dash_phase_, 9.0) < 3.0; }

  std::optional<Rgb> car_face(const ParkedCar& car, double u, double v) const {
    const double xw = lane_centre(car.z) + car.lateral;
    const double left = cam_.cx + cam_.f * (xw - 0.9) / car.z;
    const double right = cam_.cx + cam_.f * (xw + 0.9) / car.z;
    const double bottom = cam_.horizon + cam_.f * kCameraHeight / car.z;
    const double top = cam_.horizon + cam_.f * (kCameraHeight - 1.45) / car.z;
    if (u < left || u > right || v < top || v > bottom) return std::nullopt;
    const double t = (v - top) / (bottom - top);
    if (t > 0.75) return Rgb{35, 35, 35};
    if (t < 0.35 && t > 0.08) return Rgb{60, 72, 85};
    return car.body;
  }

  SceneParams p_;
  Camera cam_;
  int height_;
  double asphalt_;
  Rgb grass_, dirt_;
  double sky_;
  bool dashed_right_;
  double dash_phase_;
  double edge_jitter_;
  std::vector<ParkedCar> cars_;
};

Tensorf render_rgb(const SceneParams& p, int w, int h) {
  const SceneModel model(p, w, h);
  Tensorf rgb(3, h, w);
  constexpr double inv = 1.0 / (kSupersample * kSupersample);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Rgb acc{0, 0, 0};
      for (int sy = 0; sy < kSupersample; ++sy)
        for (int sx = 0; sx < kSupersample; ++sx) {
          const Rgb c = model.sample(x + (sx + 0.5) / kSupersample, y + (sy + 0.5) / kSupersample);
          for (int k = 0; k < 3; ++k) acc[k] += c[k];
        }
      for (int k = 0; k < 3; ++k) rgb(k, y, x) = float(std::nearbyint(std::clamp(acc[k] * inv, 0.0, 255.0)));
    }
  }
  return rgb;
}

// Ground-plane warp for a camera moved `shift` meters right: a row at depth z
// slides left by f * shift / z = shift * (v - horizon) / camera_height pixels.
Tensorf warp_lateral(const Tensorf& rgb, double shift) {
  const Camera cam(rgb.width(), rgb.height());
  Tensorf out = rgb;
  const int w = rgb.width();
  for (int y = 0; y < rgb.height(); ++y) {
    const double v = y + 0.5;
    if (v <= cam.horizon) continue;
    const double px = shift * (v - cam.horizon) / kCameraHeight;
    for (int x = 0; x < w; ++x) {
      const double src = std::clamp(x + px, 0.0, double(w - 1));
      const int x0 = int(std::floor(src));
      const int x1 = std::min(x0 + 1, w - 1);
      const double t = src - x0;
      for (int c = 0; c < 3; ++c)
        out(c, y, x) = float(std::nearbyint(rgb(c, y, x0) * (1 - t) + rgb(c, y, x1) * t));
    }
  }
  return out;
}

}  // namespace

LabeledFrame render_scene(const SceneParams& p, int width, int height, const SteeringLaw& law) {
  if (width < 1 || height < 1) throw Error(ErrorCode::range, "render_scene: image size must be positive");
  if (std::abs(p.lane_offset) > kLaneWidth / 2)
    throw Error(ErrorCode::range, "render_scene: |lane_offset| exceeds half the lane width");
  LabeledFrame frame;
  frame.image_rgb = render_rgb(p, width, height);
  frame.image_yuv = rgb_to_yuv(frame.image_rgb);
  frame.steering = float(law.steering(p));
  frame.source = p;
  return frame;
}

LabeledFrame augment(const LabeledFrame& frame, double lateral_shift, const AugmentParams& params) {
  if (!(std::abs(lateral_shift) <= params.shift_range))
    throw Error(ErrorCode::range, "augment: lateral shift outside the augmentation range");
  if (lateral_shift == 0.0) return frame;
  LabeledFrame out;
  if (frame.source) {
    SceneParams moved = *frame.source;
    moved.lane_offset += lateral_shift;
    moved.lane_offset = std::clamp(moved.lane_offset, -kLaneWidth / 2, kLaneWidth / 2);
    out.image_rgb = render_rgb(moved, frame.image_rgb.width(), frame.image_rgb.height());
    out.source = moved;
  } else {
    out.image_rgb = warp_lateral(frame.image_rgb, lateral_shift);
  }
  out.image_yuv = rgb_to_yuv(out.image_rgb);
  out.steering = float(double(frame.steering) - params.correction_gain * lateral_shift);
  return out;
}

}  // namespace visback
