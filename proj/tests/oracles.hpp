#pragma once

// Straight-loop reference implementations used only by tests. They work in
// double on plain std::vector buffers and share no code with the library
// kernels they check.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "visback/model.hpp"

namespace oracle {

struct Grid {
  int c = 1, h = 1, w = 1;
  std::vector<double> v;

  Grid() = default;
  Grid(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(std::size_t(c_) * h_ * w_, 0.0) {}

  double& at(int ch, int y, int x) { return v[(std::size_t(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const { return v[(std::size_t(ch) * h + y) * w + x]; }
};

inline Grid from_tensor(const visback::Tensorf& t) {
  Grid g(t.channels(), t.height(), t.width());
  for (int c = 0; c < t.channels(); ++c)
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x) g.at(c, y, x) = t(c, y, x);
  return g;
}

/// Direct sliding-window convolution; weights [out][in][ky][kx].
inline Grid conv(const Grid& in, const std::vector<double>& w, const std::vector<double>& b, int kh, int kw, int sh,
                 int sw, int out_c) {
  const int oh = (in.h - kh) / sh + 1, ow = (in.w - kw) / sw + 1;
  Grid out(out_c, oh, ow);
  for (int o = 0; o < out_c; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = b[o];
        for (int c = 0; c < in.c; ++c)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
              s += w[((std::size_t(o) * in.c + c) * kh + ky) * kw + kx] * in.at(c, y * sh + ky, x * sw + kx);
        out.at(o, y, x) = s;
      }
  return out;
}

/// y[i] = b[i] + sum_j W[i][j] x[j], W row-major.
inline std::vector<double> affine(const std::vector<double>& x, const std::vector<double>& w,
                                  const std::vector<double>& b) {
  std::vector<double> y(b);
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += w[i * x.size() + j] * x[j];
  return y;
}

inline Grid mean_over_channels(const Grid& g) {
  Grid out(1, g.h, g.w);
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      double s = 0;
      for (int c = 0; c < g.c; ++c) s += g.at(c, y, x);
      out.at(0, y, x) = s / g.c;
    }
  return out;
}

/// Gather form of the unit-kernel transposed convolution: each output pixel
/// sums the input positions whose forward footprint covers it.
inline Grid footprint_sum(const Grid& m, int kh, int kw, int sh, int sw, int th, int tw) {
  Grid out(1, th, tw);
  const int nat_h = (m.h - 1) * sh + kh, nat_w = (m.w - 1) * sw + kw;
  for (int y = 0; y < std::min(th, nat_h); ++y)
    for (int x = 0; x < std::min(tw, nat_w); ++x) {
      double s = 0;
      for (int i = 0; i < m.h; ++i)
        for (int j = 0; j < m.w; ++j)
          if (y >= i * sh && y < i * sh + kh && x >= j * sw && x < j * sw + kw) s += m.at(0, i, j);
      out.at(0, y, x) = s;
    }
  return out;
}

inline void rescale_01(Grid& g) {
  const auto [lo, hi] = std::minmax_element(g.v.begin(), g.v.end());
  const double a = *lo, b = *hi;
  for (double& x : g.v) x = b > a ? (x - a) / (b - a) : 0.0;
}

/// Mask algorithm written out directly from its six steps.
inline Grid salient_mask(const visback::ActivationTrace& trace, const visback::NetworkConfig& cfg) {
  std::vector<visback::ConvGeometry> geo;
  for (const auto& l : cfg.layers)
    if (l.kind == visback::LayerKind::conv) geo.push_back(l.geometry);
  std::vector<Grid> avg;
  for (std::size_t k = 1; k < trace.entries.size(); ++k) avg.push_back(mean_over_channels(from_tensor(trace.entries[k].activation)));
  Grid mask = avg.back();
  for (std::size_t k = avg.size() - 1; k > 0; --k) {
    const Grid& below = avg[k - 1];
    Grid up = footprint_sum(mask, geo[k].kernel_h, geo[k].kernel_w, geo[k].stride_h, geo[k].stride_w, below.h, below.w);
    for (std::size_t i = 0; i < up.v.size(); ++i) up.v[i] *= below.v[i];
    mask = up;
  }
  Grid full = footprint_sum(mask, geo[0].kernel_h, geo[0].kernel_w, geo[0].stride_h, geo[0].stride_w, cfg.input_height,
                            cfg.input_width);
  rescale_01(full);
  return full;
}

/// Whole network in double with explicit loops; returns the output neuron.
/// When `pattern` is given it receives one flag per ReLU unit (pre-activation > 0).
inline double network(const visback::NetworkConfig& cfg, const visback::WeightSet& ws, const visback::Tensorf& image,
                      std::vector<char>* pattern = nullptr) {
  if (pattern) pattern->clear();
  auto rectify = [&](std::vector<double>& v) {
    for (double& x : v) {
      if (pattern) pattern->push_back(x > 0.0);
      x = std::max(0.0, x);
    }
  };
  Grid maps = from_tensor(image);
  for (double& x : maps.v) x = x / 127.5 - 1.0;
  std::vector<double> vec;
  for (std::size_t i = 1; i < cfg.layers.size(); ++i) {
    const auto& l = cfg.layers[i];
    const std::vector<double> w(ws.layers[i].weights.begin(), ws.layers[i].weights.end());
    const std::vector<double> b(ws.layers[i].biases.begin(), ws.layers[i].biases.end());
    if (l.kind == visback::LayerKind::conv) {
      const auto& g = l.geometry;
      maps = conv(maps, w, b, g.kernel_h, g.kernel_w, g.stride_h, g.stride_w, g.out_channels);
      if (l.activation == visback::Activation::relu) rectify(maps.v);
      vec = maps.v;
    } else {
      vec = affine(vec, w, b);
      if (l.activation == visback::Activation::relu) rectify(vec);
    }
  }
  return vec.at(0);
}

/// Brute-force square dilation.
inline visback::Tensorf dilate_scan(const visback::Tensorf& in, int r) {
  visback::Tensorf out(in.shape());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x) {
      float v = 0.0f;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < in.height() && xx >= 0 && xx < in.width() && in(0, yy, xx) > 0.5f) v = 1.0f;
        }
      out(0, y, x) = v;
    }
  return out;
}

/// Whole-image translation by column copies with edge replication.
inline visback::Tensorf translate_columns(const visback::Tensorf& in, int dx) {
  visback::Tensorf out(in.shape());
  for (int x = 0; x < in.width(); ++x) {
    int src = x - dx;
    if (src < 0) src = 0;
    if (src >= in.width()) src = in.width() - 1;
    for (int c = 0; c < in.channels(); ++c)
      for (int y = 0; y < in.height(); ++y) out(c, y, x) = in(c, y, src);
  }
  return out;
}

inline visback::Tensorf random_tensor(std::mt19937& gen, int c, int h, int w, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> d(lo, hi);
  visback::Tensorf t(c, h, w);
  for (auto& x : t.values()) x = d(gen);
  return t;
}

inline double max_rel_error(const Grid& expected, const visback::Tensorf& actual) {
  double worst = 0.0;
  for (std::size_t i = 0; i < expected.v.size(); ++i) {
    const double e = expected.v[i], a = actual.values()[long(i)];
    const double denom = std::max(std::abs(e), 1e-6);
    worst = std::max(worst, std::abs(a - e) / denom);
  }
  return worst;
}

}  // namespace oracle
