#include <nlohmann/json.hpp>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tiny_nets.hpp"
#include "visback/harness.hpp"

using namespace visback;

namespace {

Tensorf random_binary(std::mt19937& gen, int h, int w, double density) {
  std::bernoulli_distribution d(density);
  Tensorf t(1, h, w);
  for (auto& x : t.values()) x = d(gen) ? 1.0f : 0.0f;
  return t;
}

ClassSegmentation seg_from(const Tensorf& class1) {
  ClassSegmentation s;
  s.class1 = class1;
  return s;
}

// Per-pixel statement of the class translation rules.
Tensorf class_shift_reference(const Tensorf& img, const Tensorf& class1, bool move_salient, int dx) {
  Tensorf out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const bool salient = class1(0, y, x) > 0.5f;
      if (salient != move_salient) continue;
      const int tx = x + dx;
      if (tx < 0 || tx >= img.width()) continue;
      if (!move_salient && class1(0, y, tx) > 0.5f) continue;  // salient pixels stay visible
      for (int c = 0; c < img.channels(); ++c) out(c, y, tx) = img(c, y, x);
    }
  return out;
}

}  // namespace

TEST_CASE("threshold_mask") {
  const std::vector<float> v{0.1f, 0.3f};
  const Tensorf t = threshold_mask({Tensorf(1, 1, 2, v)}, 0.2f);
  CHECK(t(0, 0, 0) == 0.0f);
  CHECK(t(0, 0, 1) == 1.0f);

  std::mt19937 gen(1);
  const Tensorf pos = oracle::random_tensor(gen, 1, 6, 6, 0.01f, 1.0f);
  CHECK(threshold_mask({pos}, 0.0f) == Tensorf(1, 6, 6, 1.0f));
  CHECK(threshold_mask({Tensorf(1, 6, 6, 1.0f)}, 1.0f) == Tensorf(1, 6, 6));
  // strictly greater
  CHECK(threshold_mask({Tensorf(1, 1, 1, 0.2f)}, 0.2f)(0, 0, 0) == 0.0f);
  CHECK_THROWS_AS(threshold_mask({pos}, 1.5f), Error);
  CHECK_THROWS_AS(threshold_mask({pos}, -0.1f), Error);
}

TEST_CASE("dilate examples") {
  Tensorf dot(1, 5, 5);
  dot(0, 2, 2) = 1.0f;
  const Tensorf d1 = dilate(dot, 1);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) CHECK(d1(0, y, x) == ((std::abs(y - 2) <= 1 && std::abs(x - 2) <= 1) ? 1.0f : 0.0f));

  std::mt19937 gen(2);
  const Tensorf m = random_binary(gen, 16, 16, 0.1);
  CHECK(dilate(m, 0) == m);
  CHECK(dilate(m, 3) == oracle::dilate_scan(m, 3));
  CHECK_THROWS_AS(dilate(m, -1), Error);
}

TEST_CASE("dilate matches the window scan") {
  std::mt19937 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 1 + int(gen() % 25), w = 1 + int(gen() % 40), r = int(gen() % 12);
    const Tensorf m = random_binary(gen, h, w, 0.05 + 0.1 * (trial % 3));
    REQUIRE(dilate(m, r) == oracle::dilate_scan(m, r));
  }
}

TEST_CASE("dilate is monotone and composes additively") {
  std::mt19937 gen(4);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensorf m = random_binary(gen, 20, 30, 0.05);
    Tensorf more = m;
    for (auto& x : more.values())
      if (gen() % 10 == 0) x = 1.0f;
    const int a = int(gen() % 5), b = int(gen() % 5);
    const Tensorf dm = dilate(m, a), dmore = dilate(more, a);
    for (long i = 0; i < dm.size(); ++i) REQUIRE(dmore.values()[i] >= dm.values()[i]);
    REQUIRE(dilate(dilate(m, a), b) == dilate(m, a + b));
  }
}

TEST_CASE("default dilation radius scales with width") {
  CHECK(default_dilation_radius(200) == 30);
  CHECK(default_dilation_radius(100) == 15);
  CHECK(default_dilation_radius(400) == 60);
  CHECK(default_dilation_radius(10) == 2);
}

TEST_CASE("segment") {
  const ClassSegmentation none = segment({Tensorf(1, 8, 9)}, 0.2f, 30);
  CHECK(none.class1 == Tensorf(1, 8, 9));
  CHECK(none.class2() == Tensorf(1, 8, 9, 1.0f));
  CHECK(none.dilation_radius == 30);
  CHECK(none.threshold == 0.2f);

  const ClassSegmentation all = segment({Tensorf(1, 8, 9, 1.0f)}, 0.2f, 0);
  CHECK(all.class1 == Tensorf(1, 8, 9, 1.0f));

  std::mt19937 gen(5);
  const ClassSegmentation s = segment({oracle::random_tensor(gen, 1, 12, 14, 0.0f, 1.0f)}, 0.9f, 1);
  const Tensorf c2 = s.class2();
  for (long i = 0; i < c2.size(); ++i) CHECK(c2.values()[i] + s.class1.values()[i] == 1.0f);
  CHECK(s.class1 == dilate(threshold_mask({s.class1}, 0.5f), 0));
}

TEST_CASE("shift_class identity cases") {
  std::mt19937 gen(6);
  const Tensorf img = oracle::random_tensor(gen, 3, 6, 10, 0.0f, 255.0f);
  const ClassSegmentation s = seg_from(random_binary(gen, 6, 10, 0.3));
  for (ShiftMode mode : {ShiftMode::class1, ShiftMode::class2, ShiftMode::all}) CHECK(shift_class(img, s, mode, 0) == img);
  const ClassSegmentation empty = seg_from(Tensorf(1, 6, 10));
  for (int dx : {-7, -1, 3, 9}) CHECK(shift_class(img, empty, ShiftMode::class1, dx) == img);
}

TEST_CASE("whole-image shift matches column-copy translation") {
  std::mt19937 gen(7);
  const Tensorf img = oracle::random_tensor(gen, 3, 5, 12, 0.0f, 255.0f);
  const ClassSegmentation s = seg_from(random_binary(gen, 5, 12, 0.5));
  const Tensorf five = shift_class(img, s, ShiftMode::all, 5);
  CHECK(five == oracle::translate_columns(img, 5));
  for (int x = 0; x < 5; ++x) CHECK(five(1, 3, x) == img(1, 3, 0));
  for (int dx = -11; dx <= 11; ++dx) REQUIRE(shift_class(img, s, ShiftMode::all, dx) == oracle::translate_columns(img, dx));
}

TEST_CASE("class shifts follow the per-pixel rules") {
  std::mt19937 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensorf img = oracle::random_tensor(gen, 3, 7, 15, 0.0f, 255.0f);
    const Tensorf c1 = dilate(random_binary(gen, 7, 15, 0.08), 1);
    const ClassSegmentation s = seg_from(c1);
    for (int dx = -14; dx <= 14; dx += 3) {
      REQUIRE(shift_class(img, s, ShiftMode::class1, dx) == class_shift_reference(img, c1, true, dx));
      REQUIRE(shift_class(img, s, ShiftMode::class2, dx) == class_shift_reference(img, c1, false, dx));
    }
  }
}

TEST_CASE("class-2 shift never covers salient pixels") {
  std::mt19937 gen(9);
  const Tensorf img = oracle::random_tensor(gen, 3, 6, 20, 0.0f, 255.0f);
  Tensorf c1(1, 6, 20);
  for (int y = 0; y < 6; ++y) c1(0, y, 10) = 1.0f;
  const Tensorf out = shift_class(img, seg_from(c1), ShiftMode::class2, 4);
  for (int y = 0; y < 6; ++y) CHECK(out(0, y, 10) == img(0, y, 10));
  CHECK(out(2, 0, 15) == img(2, 0, 11));
}

TEST_CASE("shift_class rejects shifts as wide as the image") {
  const Tensorf img(3, 4, 8);
  const ClassSegmentation s = seg_from(Tensorf(1, 4, 8));
  CHECK_THROWS_AS(shift_class(img, s, ShiftMode::all, 8), Error);
  CHECK_THROWS_AS(shift_class(img, s, ShiftMode::class1, -8), Error);
  CHECK_NOTHROW(shift_class(img, s, ShiftMode::class2, 7));
  CHECK_THROWS_AS(shift_class(img, seg_from(Tensorf(1, 4, 9)), ShiftMode::all, 1), ShapeError);
}

TEST_CASE("fit_line") {
  const LineFit f = fit_line({-2, 0, 1, 4}, {-3, 1, 3, 9});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));

  const LineFit flat = fit_line({0, 1, 2}, {5, 5, 5});
  CHECK(flat.slope == 0.0);
  CHECK(flat.r2 == 1.0);

  const LineFit noisy = fit_line({0, 1, 2, 3}, {0, 1, 0, 1});
  CHECK(noisy.slope == doctest::Approx(0.2));
  CHECK(noisy.r2 == doctest::Approx(0.2));
  CHECK(fit_line({1}, {2}).slope == 0.0);
  CHECK_THROWS_AS(fit_line({}, {}), Error);
  CHECK_THROWS_AS(fit_line({1, 2}, {2}), Error);
}

TEST_CASE("shift_range") {
  CHECK(shift_range(-40, 40, 4).size() == 21);
  CHECK(shift_range(-3, 3, 2) == std::vector<int>{-3, -1, 1, 3});
  CHECK_THROWS_AS(shift_range(0, 4, 0), Error);
  CHECK_THROWS_AS(shift_range(4, 0, 1), Error);
}

TEST_CASE("shift experiment with a zero-weight network") {
  const NetworkConfig cfg = NetworkConfig::pilotnet();
  std::mt19937 gen(10);
  const Tensorf img = tiny::random_image(gen, cfg);
  const ClassSegmentation s = segment({oracle::random_tensor(gen, 1, 66, 200, 0.0f, 1.0f)}, 0.8f, 3);
  const ShiftExperimentResult r = run_shift_experiment(cfg, zero_weights(cfg), img, s, shift_range(-8, 8, 4));
  REQUIRE(r.rows.size() == 5);
  for (const auto& row : r.rows) {
    CHECK(row.steer_class1 == 0.0f);
    CHECK(row.steer_class2 == 0.0f);
    CHECK(row.steer_all == 0.0f);
  }
  CHECK(r.class1.slope == 0.0);
  CHECK(r.class2.slope == 0.0);
  CHECK(r.all.slope == 0.0);
}

TEST_CASE("shift experiment rows") {
  const NetworkConfig cfg = NetworkConfig::pilotnet();
  const WeightSet ws = init_weights(cfg, 3);
  std::mt19937 gen(11);
  const Tensorf img = tiny::random_image(gen, cfg);
  const ClassSegmentation s = segment({oracle::random_tensor(gen, 1, 66, 200, 0.0f, 1.0f)}, 0.9f, 2);

  const ShiftExperimentResult zero = run_shift_experiment(cfg, ws, img, s, {0});
  REQUIRE(zero.rows.size() == 1);
  CHECK(zero.rows[0].steer_class1 == zero.rows[0].steer_all);
  CHECK(zero.rows[0].steer_class2 == zero.rows[0].steer_all);
  CHECK(zero.rows[0].steer_all == forward(cfg, ws, img).steering.inverse_turning_radius);

  const ShiftExperimentResult r = run_shift_experiment(cfg, ws, img, s, {8, -4, 0, 4, 8});
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows.front().shift_px == -4);
  CHECK(r.rows.back().shift_px == 8);
  const ShiftRow& z = r.rows[1];
  CHECK(z.shift_px == 0);
  CHECK(z.steer_class1 == z.steer_class2);
  CHECK(z.steer_class2 == z.steer_all);
  CHECK(r.rows[3].steer_all ==
        forward(cfg, ws, shift_class(img, s, ShiftMode::all, 8)).steering.inverse_turning_radius);

  CHECK_THROWS_AS(run_shift_experiment(cfg, ws, img, s, {-4, 4}), Error);
  CHECK_THROWS_AS(run_shift_experiment(cfg, ws, img, s, {0, 200}), Error);
}

TEST_CASE("CSV and summary output") {
  ShiftExperimentResult r;
  r.rows = {{-4, 0.125f, -1.0f, 2.0f / 3.0f}, {0, 0.0f, 0.0f, 0.0f}};
  r.class1 = fit_line({-4, 0}, {0.125, 0});
  r.class2 = fit_line({-4, 0}, {-1, 0});
  r.all = fit_line({-4, 0}, {2.0 / 3.0, 0});
  const std::string csv = encode_shift_csv(r);
  CHECK(csv == "shift_px,steer_class1,steer_class2,steer_all\n-4,0.125,-1,0.666667\n0,0,0,0\n");
  const nlohmann::json j = shift_summary_json(r);
  CHECK(j["class1"]["slope"].get<double>() == doctest::Approx(-0.03125));
  CHECK(j.contains("class2"));
  CHECK(j["all"].contains("r2"));
}

TEST_CASE("mode names") {
  CHECK(std::string(to_string(ShiftMode::class1)) == "class1");
  CHECK(std::string(to_string(ShiftMode::class2)) == "class2");
  CHECK(std::string(to_string(ShiftMode::all)) == "all");
}
