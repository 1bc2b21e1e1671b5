#pragma once

// Causal check of a visualization mask: split the input into salient
// (class 1) and background (class 2) pixels, translate one class at a time
// and record how the steering output responds.

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "visback/model.hpp"
#include "visback/saliency.hpp"

namespace visback {

/// 1 where mask > t, else 0. Requires 0 <= t <= 1.
Tensorf threshold_mask(const VisualizationMask& mask, float t);

/// Square (Chebyshev) dilation: a pixel is set iff any set pixel lies in the
/// (2r+1) x (2r+1) window around it.
Tensorf dilate(const Tensorf& binary, int radius);

/// 30 px at 200 px width, scaled with the input width.
int default_dilation_radius(int input_width);

struct ClassSegmentation {
  Tensorf class1;  // 1 = salient after dilation
  float threshold = 0.2f;
  int dilation_radius = 30;

  /// Complement of class1.
  Tensorf class2() const;
};

ClassSegmentation segment(const VisualizationMask& mask, float t, int radius);

enum class ShiftMode { class1, class2, all };

const char* to_string(ShiftMode mode);

/// Horizontal translation by dx pixels (positive = right).
///  all:    whole image, vacated columns replicate the edge column.
///  class1: salient pixels move and are drawn over the background.
///  class2: background pixels move; salient pixels stay where they are.
/// Positions no moved pixel lands on keep their original value; pixels that
/// leave the frame are dropped. Requires |dx| < width.
Tensorf shift_class(const Tensorf& image, const ClassSegmentation& seg, ShiftMode which, int dx);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

/// Ordinary least squares. r2 is 1 when the data has no variance and the fit is exact.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct ShiftRow {
  int shift_px = 0;
  float steer_class1 = 0.0f;
  float steer_class2 = 0.0f;
  float steer_all = 0.0f;
};

struct ShiftExperimentResult {
  std::vector<ShiftRow> rows;  // ascending shift_px
  LineFit class1;
  LineFit class2;
  LineFit all;
};

/// Shift sequence from..to inclusive with the given step.
std::vector<int> shift_range(int from, int to, int step);

/// Evaluates every (shift, mode) pair; shifts must contain 0.
ShiftExperimentResult run_shift_experiment(const NetworkConfig& cfg, const WeightSet& weights,
                                           const Tensorf& image_yuv, const ClassSegmentation& seg,
                                           std::vector<int> shifts);

/// Header `shift_px,steer_class1,steer_class2,steer_all`; 6 significant digits.
std::string encode_shift_csv(const ShiftExperimentResult& result);
nlohmann::json shift_summary_json(const ShiftExperimentResult& result);

}  // namespace visback
