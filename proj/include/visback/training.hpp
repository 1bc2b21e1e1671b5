#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "visback/model.hpp"
#include "visback/scene.hpp"

namespace visback {

struct TrainConfig {
  float learning_rate = 0.03f;
  int batch_size = 16;
  int epochs = 30;
  std::uint64_t seed = 1;
  double augmentation_shift_range = 0.6;  // m
  double steering_correction_gain = 0.2;  // 1/(m*m)

  AugmentParams augment_params() const { return {augmentation_shift_range, steering_correction_gain}; }
};

using Dataset = std::vector<LabeledFrame>;

/// Renders `count` frames. Styles cycle through `styles`; every second frame
/// is an augmented copy of a freshly rendered scene, shifted uniformly within
/// the configured range.
Dataset generate_dataset(int count, const std::vector<SceneStyle>& styles, std::uint64_t seed,
                         const TrainConfig& tc, int width, int height, bool with_augmentation = true);

/// frames/NNNNNN.ppm plus labels.csv (`frame,steering`), steering written in
/// shortest round-trip form.
void save_dataset(const Dataset& data, const std::string& dir);
Dataset load_dataset(const std::string& dir);

struct TrainResult {
  WeightSet weights;
  std::vector<float> loss_history;  // mean per-sample loss seen during each epoch
};

using EpochCallback = std::function<void(int epoch, float loss)>;

/// Plain minibatch SGD on mean squared error, seeded and deterministic.
/// Throws Error(numerical) naming the epoch if the loss stops being finite.
TrainResult train(const NetworkConfig& cfg, const TrainConfig& tc, const Dataset& data,
                  const EpochCallback& on_epoch = {});

/// Same as train() but starting from the given weights.
TrainResult train_from(const NetworkConfig& cfg, const TrainConfig& tc, const Dataset& data, WeightSet weights,
                       const EpochCallback& on_epoch = {});

double evaluate_mse(const NetworkConfig& cfg, const WeightSet& weights, const Dataset& data);
double label_variance(const Dataset& data);

}  // namespace visback
