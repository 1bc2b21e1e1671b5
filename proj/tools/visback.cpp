// visback: generate synthetic road data, train the steering network, and
// explain its decisions with salient-region masks and shift experiments.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "visback/fileio.hpp"
#include "visback/harness.hpp"
#include "visback/image_io.hpp"
#include "visback/saliency.hpp"
#include "visback/training.hpp"
#include "visback/version.hpp"
#include "visback/weights_io.hpp"

namespace fs = std::filesystem;
using namespace visback;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

struct Manifest {
  std::string subcommand;
  std::optional<std::string> config;
  std::optional<std::string> weights;
  std::optional<std::uint64_t> seed;
  std::string output;
  nlohmann::json extra = nlohmann::json::object();

  void write(const std::string& path) const {
    nlohmann::json j;
    j["subcommand"] = subcommand;
    j["config"] = config ? nlohmann::json(*config) : nlohmann::json(nullptr);
    j["weights"] = weights ? nlohmann::json(*weights) : nlohmann::json(nullptr);
    j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    j["output"] = output;
    j["tool_version"] = kVersion;
    if (!extra.empty()) j["parameters"] = extra;
    write_file_atomic(path, j.dump(2) + "\n");
  }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::io, "cannot create output directory '" + dir + "'");
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

/// Sibling path with the extension replaced: "w.pnw" -> "w.loss.csv".
std::string sibling(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

Tensorf load_input_image(const std::string& path, const NetworkConfig& cfg) {
  const Tensorf rgb = read_pnm(path);
  if (rgb.channels() != 3) throw Error(ErrorCode::format, "'" + path + "' is not a colour (P6) image");
  if (rgb.height() != cfg.input_height) throw ShapeError("height", cfg.input_height, rgb.height(), "input image");
  if (rgb.width() != cfg.input_width) throw ShapeError("width", cfg.input_width, rgb.width(), "input image");
  return rgb;
}

std::vector<SceneStyle> parse_styles(const std::string& s) {
  if (s == "mixed")
    return {SceneStyle::lane_marked, SceneStyle::unmarked_with_parked_cars, SceneStyle::grass_edge};
  return {scene_style_from_string(s)};
}

std::pair<int, int> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) throw CLI::ValidationError("--range", "expected A..B");
  try {
    return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--range", "expected integers A..B");
  }
}

Tensorf gray_levels(const Tensorf& t) {
  Tensorf out = normalize_01(t);
  out.values() *= 255.0f;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steering network trainer and salient-object explainer"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Render a synthetic labelled dataset");
  int gen_scenes = 100;
  std::string gen_style = "mixed", gen_out;
  std::uint64_t gen_seed = 1;
  int gen_width = 200, gen_height = 66;
  double gen_augment = 0.0;
  gen->add_option("--scenes", gen_scenes, "Number of frames")->check(CLI::NonNegativeNumber);
  gen->add_option("--style", gen_style, "lane_marked | unmarked_with_parked_cars | grass_edge | mixed")
      ->check(CLI::IsMember({"lane_marked", "unmarked_with_parked_cars", "grass_edge", "mixed"}));
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--width", gen_width, "Frame width")->check(CLI::PositiveNumber);
  gen->add_option("--height", gen_height, "Frame height")->check(CLI::PositiveNumber);
  gen->add_option("--augment", gen_augment, "Lateral shift range in meters for augmented frames (0 = off)")
      ->check(CLI::NonNegativeNumber);

  // config
  auto* config = app.add_subcommand("config", "Print the default network configuration as JSON");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the steering network on a dataset directory");
  std::string train_config, train_data, train_out;
  TrainConfig tc;
  train_cmd->add_option("--config", train_config, "Network config JSON (default architecture if omitted)");
  train_cmd->add_option("--data", train_data, "Dataset directory")->required();
  train_cmd->add_option("--out", train_out, "Output weight file (.pnw)")->required();
  train_cmd->add_option("--epochs", tc.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lr", tc.learning_rate, "SGD learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch", tc.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tc.seed, "Initialization and shuffling seed");

  // predict
  auto* predict = app.add_subcommand("predict", "Print the steering output for one image");
  std::string pred_weights, pred_image;
  predict->add_option("--weights", pred_weights, "Weight file")->required();
  predict->add_option("--image", pred_image, "Input PPM")->required();

  // explain
  auto* explain = app.add_subcommand("explain", "Compute the visualization mask and overlay for one image");
  std::string ex_weights, ex_image, ex_out;
  bool ex_trace = false;
  float ex_gain = 255.0f;
  explain->add_option("--weights", ex_weights, "Weight file")->required();
  explain->add_option("--image", ex_image, "Input PPM")->required();
  explain->add_option("--out", ex_out, "Output directory")->required();
  explain->add_flag("--mask-trace", ex_trace, "Also write averaged maps and intermediate masks per level");
  explain->add_option("--gain", ex_gain, "Overlay gain");

  // shift
  auto* shift = app.add_subcommand("shift", "Run the pixel-shift experiment on one image");
  std::string sh_weights, sh_image, sh_out, sh_range = "-40..40";
  float sh_threshold = 0.2f;
  int sh_dilate = -1, sh_step = 4;
  shift->add_option("--weights", sh_weights, "Weight file")->required();
  shift->add_option("--image", sh_image, "Input PPM")->required();
  shift->add_option("--out", sh_out, "Output directory")->required();
  shift->add_option("--threshold", sh_threshold, "Mask threshold for class 1")->check(CLI::Range(0.0f, 1.0f));
  shift->add_option("--dilate", sh_dilate, "Dilation radius in pixels (default: 30 px scaled to 200 px width)");
  shift->add_option("--range", sh_range, "Shift range A..B in pixels (use --range=-40..40)");
  shift->add_option("--step", sh_step, "Shift step in pixels")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      ensure_dir(gen_out);
      TrainConfig gtc;
      if (gen_augment > 0) gtc.augmentation_shift_range = gen_augment;
      const Dataset data =
          generate_dataset(gen_scenes, parse_styles(gen_style), gen_seed, gtc, gen_width, gen_height, gen_augment > 0);
      save_dataset(data, gen_out);
      Manifest m{"gen", std::nullopt, std::nullopt, gen_seed, gen_out};
      m.extra = {{"scenes", gen_scenes}, {"style", gen_style}, {"width", gen_width},
                 {"height", gen_height}, {"augment", gen_augment}};
      m.write(in_dir(gen_out, "manifest.json"));
      std::cout << "wrote " << data.size() << " frames to " << gen_out << "\n";
    } else if (*config) {
      std::cout << config_to_json(NetworkConfig::pilotnet()).dump(2) << "\n";
    } else if (*train_cmd) {
      const NetworkConfig cfg = train_config.empty() ? NetworkConfig::pilotnet() : load_config(train_config);
      const Dataset data = load_dataset(train_data);
      std::string log = "epoch,loss\n";
      const TrainResult r = train(cfg, tc, data, [&](int epoch, float loss) {
        std::cout << "epoch " << epoch << ": loss " << loss << std::endl;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%d,%.9g\n", epoch, double(loss));
        log += buf;
      });
      save_weights(cfg, r.weights, train_out);
      write_file_atomic(sibling(train_out, ".loss.csv"), log);
      Manifest m{"train", train_config.empty() ? std::nullopt : std::optional(train_config), train_out, tc.seed,
                 fs::path(train_out).parent_path().string()};
      m.extra = {{"data", train_data}, {"epochs", tc.epochs}, {"learning_rate", tc.learning_rate},
                 {"batch_size", tc.batch_size}};
      m.write(sibling(train_out, ".manifest.json"));
    } else if (*predict) {
      const WeightFile wf = load_weights(pred_weights);
      const Tensorf yuv = rgb_to_yuv(load_input_image(pred_image, wf.config));
      std::printf("%.9g\n", double(forward(wf.config, wf.weights, yuv).steering.inverse_turning_radius));
    } else if (*explain) {
      const WeightFile wf = load_weights(ex_weights);
      const Tensorf rgb = load_input_image(ex_image, wf.config);
      const ForwardResult fr = forward(wf.config, wf.weights, rgb_to_yuv(rgb));
      const MaskResult mr = compute_mask(fr.trace, wf.config);
      ensure_dir(ex_out);
      write_file_atomic(in_dir(ex_out, "mask.pgm"), encode_mask_pgm(mr.mask));
      write_file_atomic(in_dir(ex_out, "mask.msk"), encode_mask_raw(mr.mask));
      write_ppm(in_dir(ex_out, "overlay.ppm"), overlay(rgb, mr.mask, ex_gain));
      if (ex_trace) {
        for (std::size_t k = 0; k < mr.trace.levels.size(); ++k) {
          const std::string n = std::to_string(k + 1);
          write_pgm(in_dir(ex_out, "average_" + n + ".pgm"), gray_levels(channel_mean(fr.trace.entries[k + 1].activation)));
          write_pgm(in_dir(ex_out, "level_" + n + ".pgm"), gray_levels(mr.trace.levels[k]));
        }
      }
      Manifest m{"explain", std::nullopt, ex_weights, std::nullopt, ex_out};
      m.extra = {{"image", ex_image}, {"gain", ex_gain}, {"mask_trace", ex_trace},
                 {"steering", fr.steering.inverse_turning_radius}};
      m.write(in_dir(ex_out, "manifest.json"));
      std::printf("%.9g\n", double(fr.steering.inverse_turning_radius));
    } else if (*shift) {
      const auto [from, to] = parse_range(sh_range);
      const std::vector<int> shifts = shift_range(from, to, sh_step);
      const WeightFile wf = load_weights(sh_weights);
      const Tensorf yuv = rgb_to_yuv(load_input_image(sh_image, wf.config));
      const int radius = sh_dilate >= 0 ? sh_dilate : default_dilation_radius(wf.config.input_width);
      const MaskResult mr = compute_mask(forward(wf.config, wf.weights, yuv).trace, wf.config);
      const ClassSegmentation seg = segment(mr.mask, sh_threshold, radius);
      const ShiftExperimentResult result = run_shift_experiment(wf.config, wf.weights, yuv, seg, shifts);
      ensure_dir(sh_out);
      write_file_atomic(in_dir(sh_out, "shifts.csv"), encode_shift_csv(result));
      nlohmann::json summary = shift_summary_json(result);
      summary["threshold"] = sh_threshold;
      summary["dilation_radius"] = radius;
      write_file_atomic(in_dir(sh_out, "summary.json"), summary.dump(2) + "\n");
      Tensorf class1 = seg.class1;
      class1.values() *= 255.0f;
      write_pgm(in_dir(sh_out, "class1.pgm"), class1);
      Manifest m{"shift", std::nullopt, sh_weights, std::nullopt, sh_out};
      m.extra = {{"image", sh_image}, {"threshold", sh_threshold}, {"dilate", radius}, {"range", sh_range},
                 {"step", sh_step}};
      m.write(in_dir(sh_out, "manifest.json"));
      std::cout << summary.dump(2) << "\n";
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return e.code() == ErrorCode::numerical ? kNumerical : kData;
  }
  return kOk;
}
