#include "visback/training.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "visback/fileio.hpp"
#include "visback/image_io.hpp"
#include "visback/parallel.hpp"
#include "visback/rng.hpp"

namespace fs = std::filesystem;

namespace visback {

Dataset generate_dataset(int count, const std::vector<SceneStyle>& styles, std::uint64_t seed,
                         const TrainConfig& tc, int width, int height, bool with_augmentation) {
  if (count < 0) throw Error(ErrorCode::range, "frame count must be >= 0");
  if (styles.empty()) throw Error(ErrorCode::range, "at least one scene style is required");
  Dataset data{std::size_t(count)};
  const AugmentParams aug = tc.augment_params();
  parallel_for(data.size(), [&](std::size_t i) {
    Rng rng(mix_seed(seed * 0x100000001b3ULL + i));
    const SceneParams p = sample_scene(rng, styles[i % styles.size()]);
    LabeledFrame frame = render_scene(p, width, height, {aug.correction_gain, SteeringLaw{}.heading_gain});
    if (with_augmentation && i % 2 == 1) {
      double shift = rng.uniform(-aug.shift_range, aug.shift_range);
      // keep the displaced camera on the road
      shift = std::clamp(shift, -kLaneWidth / 2 - p.lane_offset, kLaneWidth / 2 - p.lane_offset);
      frame = augment(frame, shift, aug);
    }
    data[i] = std::move(frame);
  });
  return data;
}

namespace {

std::string frame_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

std::string shortest(float v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "frames", ec);
  if (ec) throw Error(ErrorCode::io, "cannot create dataset directory '" + dir + "'");
  std::string labels = "frame,steering\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string name = frame_name(i);
    write_ppm((fs::path(dir) / "frames" / (name + ".ppm")).string(), data[i].image_rgb);
    labels += name + "," + shortest(data[i].steering) + "\n";
  }
  write_file_atomic((fs::path(dir) / "labels.csv").string(), labels);
}

Dataset load_dataset(const std::string& dir) {
  const std::string text = read_file((fs::path(dir) / "labels.csv").string());
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "frame,steering")
    throw Error(ErrorCode::format, "labels.csv: missing header 'frame,steering'");
  Dataset data;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(ErrorCode::format, "labels.csv line " + std::to_string(lineno) + ": expected two fields");
    const std::string name = line.substr(0, comma);
    float steering = 0.0f;
    const char* first = line.data() + comma + 1;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, steering);
    if (ec != std::errc() || ptr != last || !std::isfinite(steering))
      throw Error(ErrorCode::format, "labels.csv line " + std::to_string(lineno) + ": bad steering value");
    LabeledFrame f;
    f.image_rgb = read_pnm((fs::path(dir) / "frames" / (name + ".ppm")).string());
    if (f.image_rgb.channels() != 3) throw Error(ErrorCode::format, "frame '" + name + "' is not a colour image");
    f.image_yuv = rgb_to_yuv(f.image_rgb);
    f.steering = steering;
    data.push_back(std::move(f));
  }
  return data;
}

double evaluate_mse(const NetworkConfig& cfg, const WeightSet& weights, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::vector<double> err(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const double e = double(forward(cfg, weights, data[i].image_yuv).steering.inverse_turning_radius) -
                     double(data[i].steering);
    err[i] = e * e;
  });
  return std::accumulate(err.begin(), err.end(), 0.0) / double(data.size());
}

double label_variance(const Dataset& data) {
  if (data.empty()) return 0.0;
  double mean = 0.0;
  for (const auto& f : data) mean += f.steering;
  mean /= double(data.size());
  double var = 0.0;
  for (const auto& f : data) var += (f.steering - mean) * (f.steering - mean);
  return var / double(data.size());
}

TrainResult train(const NetworkConfig& cfg, const TrainConfig& tc, const Dataset& data, const EpochCallback& on_epoch) {
  return train_from(cfg, tc, data, init_weights(cfg, tc.seed), on_epoch);
}

TrainResult train_from(const NetworkConfig& cfg, const TrainConfig& tc, const Dataset& data, WeightSet weights,
                       const EpochCallback& on_epoch) {
  if (data.empty()) throw Error(ErrorCode::range, "train: dataset is empty");
  if (!(tc.learning_rate >= 0.0f)) throw Error(ErrorCode::range, "train: learning rate must be >= 0");
  if (tc.batch_size < 1 || tc.epochs < 0) throw Error(ErrorCode::range, "train: batch size and epochs must be positive");
  check_weights(cfg, weights);

  TrainResult result;
  Rng rng(mix_seed(tc.seed ^ 0x5eedULL));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(tc.batch_size)) {
      const std::size_t n = std::min(order.size() - start, std::size_t(tc.batch_size));
      std::vector<Gradient> grads(n);
      try {
        parallel_for(n, [&](std::size_t k) {
          const LabeledFrame& f = data[order[start + k]];
          grads[k] = backward(cfg, weights, f.image_yuv, f.steering);
        });
      } catch (const Error& e) {
        if (e.code() != ErrorCode::numerical) throw;
        throw Error(ErrorCode::numerical, "training diverged at epoch " + std::to_string(epoch + 1));
      }
      // Summation in sample order keeps the update independent of the thread count.
      const float step = tc.learning_rate / float(n);
      for (std::size_t l = 0; l < weights.layers.size(); ++l) {
        LayerParams& w = weights.layers[l];
        if (w.weights.size() == 0) continue;
        Eigen::VectorXf gw = grads[0].grads.layers[l].weights;
        Eigen::VectorXf gb = grads[0].grads.layers[l].biases;
        for (std::size_t k = 1; k < n; ++k) {
          gw += grads[k].grads.layers[l].weights;
          gb += grads[k].grads.layers[l].biases;
        }
        w.weights -= step * gw;
        w.biases -= step * gb;
      }
      for (const auto& g : grads) epoch_loss += g.loss;
    }
    const float mean_loss = float(epoch_loss / double(data.size()));
    if (!std::isfinite(mean_loss))
      throw Error(ErrorCode::numerical, "training diverged at epoch " + std::to_string(epoch + 1));
    result.loss_history.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch + 1, mean_loss);
  }
  result.weights = std::move(weights);
  return result;
}

}  // namespace visback
