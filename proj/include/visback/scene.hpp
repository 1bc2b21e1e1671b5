#pragma once

// Synthetic forward-camera road scenes with a ground-truth steering label.
//
// Vehicle frame: x lateral (positive right), z forward, camera 1.5 m above a
// flat ground plane. The lane centre line seen from the car is
//   x(z) = -lane_offset - heading * z + curvature * z^2 / 2
// and the label is a proportional pull back to the centre:
//   steering = curvature - offset_gain * lane_offset - heading_gain * heading.
// Positive steering turns right.

#include <cstdint>
#include <optional>
#include <string>

#include "visback/rng.hpp"
#include "visback/tensor.hpp"

namespace visback {

inline constexpr double kLaneWidth = 3.6;  // meters

enum class SceneStyle { lane_marked, unmarked_with_parked_cars, grass_edge };

const char* to_string(SceneStyle style);
SceneStyle scene_style_from_string(const std::string& name);

struct SceneParams {
  double lane_offset = 0.0;  // m, positive = car right of centre
  double heading = 0.0;      // rad, positive = car yawed right of the lane direction
  double curvature = 0.0;    // 1/m, positive = road bends right
  SceneStyle style = SceneStyle::lane_marked;
  std::uint64_t seed = 0;
};

struct SteeringLaw {
  double offset_gain = 0.2;   // 1/(m*m)
  double heading_gain = 1.0;  // 1/(m*rad)

  double steering(const SceneParams& p) const {
    return p.curvature - offset_gain * p.lane_offset - heading_gain * p.heading;
  }
};

struct LabeledFrame {
  Tensorf image_rgb;  // integer-valued, [0, 255]
  Tensorf image_yuv;  // rgb_to_yuv(image_rgb)
  float steering = 0.0f;
  std::optional<SceneParams> source;  // set when the frame was rendered here
};

/// Random scene of the given style; lateral offset within +-0.8 m,
/// heading within +-0.06 rad, curvature within +-0.02 1/m.
SceneParams sample_scene(Rng& rng, SceneStyle style);

/// Deterministic rasterization; the same params always give the same pixels.
LabeledFrame render_scene(const SceneParams& p, int width, int height, const SteeringLaw& law = {});

struct AugmentParams {
  double shift_range = 0.6;      // m, admissible |lateral_shift|
  double correction_gain = 0.2;  // 1/(m*m)
};

/// Simulates the camera displaced `lateral_shift` meters to the right and
/// relabels with steering - correction_gain * lateral_shift. Rendered frames
/// are re-rendered from their params; others are warped on the ground plane.
LabeledFrame augment(const LabeledFrame& frame, double lateral_shift, const AugmentParams& params = {});

}  // namespace visback
