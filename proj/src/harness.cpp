#include "visback/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "visback/parallel.hpp"

namespace visback {

Tensorf threshold_mask(const VisualizationMask& mask, float t) {
  if (!(t >= 0.0f && t <= 1.0f)) throw Error(ErrorCode::range, "threshold must lie in [0, 1]");
  Tensorf out(mask.values.shape());
  out.values() = (mask.values.values().array() > t).cast<float>();
  return out;
}

namespace {

// Running-count max filter along one row or column: out[i] = any(in[i-r .. i+r]).
void dilate_line(const float* in, float* out, int n, long stride, int r) {
  int count = 0;
  for (int i = 0; i < std::min(r, n); ++i) count += in[i * stride] > 0.5f;
  for (int i = 0; i < n; ++i) {
    if (i + r < n) count += in[(i + r) * stride] > 0.5f;
    if (i - r - 1 >= 0) count -= in[(i - r - 1) * stride] > 0.5f;
    out[i * stride] = count > 0 ? 1.0f : 0.0f;
  }
}

}  // namespace

Tensorf dilate(const Tensorf& binary, int radius) {
  if (radius < 0) throw Error(ErrorCode::range, "dilation radius must be >= 0");
  if (radius == 0) return binary;
  Tensorf rows(binary.shape()), out(binary.shape());
  const int h = binary.height(), w = binary.width();
  for (int c = 0; c < binary.channels(); ++c) {
    const float* src = binary.channel(c).data();
    float* mid = rows.channel(c).data();
    float* dst = out.channel(c).data();
    for (int y = 0; y < h; ++y) dilate_line(src + long(y) * w, mid + long(y) * w, w, 1, radius);
    for (int x = 0; x < w; ++x) dilate_line(mid + x, dst + x, h, w, radius);
  }
  return out;
}

int default_dilation_radius(int input_width) { return int(std::lround(30.0 * input_width / 200.0)); }

Tensorf ClassSegmentation::class2() const {
  Tensorf out(class1.shape());
  out.values() = 1.0f - class1.values().array();
  return out;
}

ClassSegmentation segment(const VisualizationMask& mask, float t, int radius) {
  return {dilate(threshold_mask(mask, t), radius), t, radius};
}

const char* to_string(ShiftMode mode) {
  switch (mode) {
    case ShiftMode::class1: return "class1";
    case ShiftMode::class2: return "class2";
    case ShiftMode::all: return "all";
  }
  return "?";
}

Tensorf shift_class(const Tensorf& image, const ClassSegmentation& seg, ShiftMode which, int dx) {
  const int h = image.height(), w = image.width();
  if (std::abs(dx) >= w) throw Error(ErrorCode::range, "shift magnitude must be smaller than the image width");
  if (seg.class1.height() != h) throw ShapeError("height", h, seg.class1.height(), "shift_class segmentation");
  if (seg.class1.width() != w) throw ShapeError("width", w, seg.class1.width(), "shift_class segmentation");

  Tensorf out = image;
  if (dx == 0) return out;
  if (which == ShiftMode::all) {
    for (int c = 0; c < image.channels(); ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(c, y, x) = image(c, y, std::clamp(x - dx, 0, w - 1));
    return out;
  }

  const auto salient = seg.class1.channel(0);
  const bool move_salient = which == ShiftMode::class1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool is_salient = salient(y, x) > 0.5f;
      if (is_salient != move_salient) continue;
      const int tx = x + dx;
      if (tx < 0 || tx >= w) continue;
      // Moved background never covers the salient pixels that stay put.
      if (!move_salient && salient(y, tx) > 0.5f) continue;
      for (int c = 0; c < image.channels(); ++c) out(c, y, tx) = image(c, y, x);
    }
  }
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) throw ShapeError("length", long(x.size()), long(y.size()), "fit_line");
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0 ? 1.0 - ss_res / syy : (ss_res == 0 ? 1.0 : 0.0);
  return fit;
}

std::vector<int> shift_range(int from, int to, int step) {
  if (step < 1) throw Error(ErrorCode::range, "shift step must be >= 1");
  if (from > to) throw Error(ErrorCode::range, "shift range is empty");
  std::vector<int> out;
  for (int s = from; s <= to; s += step) out.push_back(s);
  return out;
}

ShiftExperimentResult run_shift_experiment(const NetworkConfig& cfg, const WeightSet& weights,
                                           const Tensorf& image_yuv, const ClassSegmentation& seg,
                                           std::vector<int> shifts) {
  std::sort(shifts.begin(), shifts.end());
  shifts.erase(std::unique(shifts.begin(), shifts.end()), shifts.end());
  if (!std::binary_search(shifts.begin(), shifts.end(), 0))
    throw Error(ErrorCode::range, "shift list must include 0");
  check_weights(cfg, weights);

  constexpr ShiftMode modes[] = {ShiftMode::class1, ShiftMode::class2, ShiftMode::all};
  std::vector<float> steer(shifts.size() * 3);
  parallel_for(steer.size(), [&](std::size_t i) {
    const Tensorf shifted = shift_class(image_yuv, seg, modes[i % 3], shifts[i / 3]);
    steer[i] = forward(cfg, weights, shifted).steering.inverse_turning_radius;
  });

  ShiftExperimentResult result;
  std::vector<double> xs, y1, y2, ya;
  for (std::size_t k = 0; k < shifts.size(); ++k) {
    result.rows.push_back({shifts[k], steer[3 * k], steer[3 * k + 1], steer[3 * k + 2]});
    xs.push_back(shifts[k]);
    y1.push_back(steer[3 * k]);
    y2.push_back(steer[3 * k + 1]);
    ya.push_back(steer[3 * k + 2]);
  }
  result.class1 = fit_line(xs, y1);
  result.class2 = fit_line(xs, y2);
  result.all = fit_line(xs, ya);
  return result;
}

namespace {

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

nlohmann::json fit_json(const LineFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
}

}  // namespace

std::string encode_shift_csv(const ShiftExperimentResult& result) {
  std::string out = "shift_px,steer_class1,steer_class2,steer_all\n";
  for (const ShiftRow& r : result.rows)
    out += std::to_string(r.shift_px) + "," + g6(r.steer_class1) + "," + g6(r.steer_class2) + "," +
           g6(r.steer_all) + "\n";
  return out;
}

nlohmann::json shift_summary_json(const ShiftExperimentResult& result) {
  return {{"class1", fit_json(result.class1)},
          {"class2", fit_json(result.class2)},
          {"all", fit_json(result.all)},
          {"shifts", result.rows.size()}};
}

}  // namespace visback
