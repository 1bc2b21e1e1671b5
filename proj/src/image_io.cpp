#include "visback/image_io.hpp"

#include <cctype>
#include <cmath>

#include "visback/fileio.hpp"

namespace visback {

namespace {

unsigned char to_byte(float v) {
  const float r = std::nearbyint(std::clamp(v, 0.0f, 255.0f));
  return static_cast<unsigned char>(r);
}

std::string header(const char* magic, int w, int h) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    long v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1 << 20) throw Error(ErrorCode::format, "Netpbm header value too large");
      ++digits;
    }
    if (digits == 0) {
      if (pos_ >= bytes_.size()) throw Error(ErrorCode::truncated, "Netpbm header truncated");
      throw Error(ErrorCode::format, "malformed Netpbm header");
    }
    return int(v);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size()) throw Error(ErrorCode::truncated, "Netpbm header truncated");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

std::string encode_ppm(const Tensorf& rgb) {
  if (rgb.channels() != 3) throw ShapeError("channels", 3, rgb.channels(), "encode_ppm");
  std::string out = header("P6", rgb.width(), rgb.height());
  out.reserve(out.size() + std::size_t(rgb.size()));
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x)
      for (int c = 0; c < 3; ++c) out.push_back(char(to_byte(rgb(c, y, x))));
  return out;
}

std::string encode_pgm(const Tensorf& gray) {
  if (gray.channels() != 1) throw ShapeError("channels", 1, gray.channels(), "encode_pgm");
  std::string out = header("P5", gray.width(), gray.height());
  for (float v : gray.values()) out.push_back(char(to_byte(v)));
  return out;
}

Tensorf decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw Error(ErrorCode::format, "not a binary PGM/PPM file");
  const int channels = bytes[1] == '6' ? 3 : 1;
  HeaderReader reader(bytes);
  const int w = reader.next_int();
  const int h = reader.next_int();
  const int maxval = reader.next_int();
  if (w < 1 || h < 1) throw Error(ErrorCode::format, "Netpbm image has zero size");
  if (maxval != 255) throw Error(ErrorCode::format, "only maxval 255 is supported");
  const std::size_t start = reader.raster_start();
  const std::size_t need = std::size_t(w) * h * channels;
  if (bytes.size() < start + need) throw Error(ErrorCode::truncated, "Netpbm raster truncated");

  Tensorf out(channels, h, w);
  const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + start);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) out(c, y, x) = float(*px++);
  return out;
}

void write_ppm(const std::string& path, const Tensorf& rgb) { write_file_atomic(path, encode_ppm(rgb)); }
void write_pgm(const std::string& path, const Tensorf& gray) { write_file_atomic(path, encode_pgm(gray)); }
Tensorf read_pnm(const std::string& path) { return decode_pnm(read_file(path)); }

Tensorf rgb_to_yuv(const Tensorf& rgb) {
  if (rgb.channels() != 3) throw ShapeError("channels", 3, rgb.channels(), "rgb_to_yuv");
  Tensorf yuv(rgb.shape());
  const auto r = rgb.channel(0).array(), g = rgb.channel(1).array(), b = rgb.channel(2).array();
  yuv.channel(0) = (0.299f * r + 0.587f * g + 0.114f * b).cwiseMax(0.0f).cwiseMin(255.0f).matrix();
  yuv.channel(1) = (128.0f - 0.168736f * r - 0.331264f * g + 0.5f * b).cwiseMax(0.0f).cwiseMin(255.0f).matrix();
  yuv.channel(2) = (128.0f + 0.5f * r - 0.418688f * g - 0.081312f * b).cwiseMax(0.0f).cwiseMin(255.0f).matrix();
  return yuv;
}

Tensorf yuv_to_rgb(const Tensorf& yuv) {
  if (yuv.channels() != 3) throw ShapeError("channels", 3, yuv.channels(), "yuv_to_rgb");
  Tensorf rgb(yuv.shape());
  const auto y = yuv.channel(0).array();
  const auto u = yuv.channel(1).array() - 128.0f, v = yuv.channel(2).array() - 128.0f;
  rgb.channel(0) = (y + 1.402f * v).cwiseMax(0.0f).cwiseMin(255.0f).matrix();
  rgb.channel(1) = (y - 0.344136f * u - 0.714136f * v).cwiseMax(0.0f).cwiseMin(255.0f).matrix();
  rgb.channel(2) = (y + 1.772f * u).cwiseMax(0.0f).cwiseMin(255.0f).matrix();
  return rgb;
}

Tensorf flip_horizontal(const Tensorf& t) {
  Tensorf out(t.shape());
  for (int c = 0; c < t.channels(); ++c) out.channel(c) = t.channel(c).rowwise().reverse();
  return out;
}

}  // namespace visback
