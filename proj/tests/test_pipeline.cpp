#include <cmath>

#include "doctest.h"
#include "mdgru/optim.hpp"
#include "mdgru/pipeline.hpp"
#include "mdgru/rng.hpp"

using namespace mdgru;

namespace {

Volume random_volume(std::array<int64_t, 3> extents, uint64_t seed, double lo = 0,
                     double hi = 100) {
  Volume v = Volume::zeros(extents, {1, 1, 1}, VoxelType::f64);
  Rng rng(seed);
  for (auto& x : v.data) x = rng.uniform(lo, hi);
  return v;
}

// Miniature pipeline: 16^3 padded, factor 2, 8^3 windows, tiny channels.
PipelineConfig mini_pipeline() {
  PipelineConfig p;
  p.window_extents = {8, 8, 8};
  p.coarse_factor = 2;
  p.padded_extents = {16, 16, 16};
  p.input_conv_channels = 2;
  p.superres_n = 2;
  return p;
}

NetProfile mini_profile() {
  NetProfile n;
  n.mdgru_channels = {2, 2, 2};
  n.pointwise_channels = {2, 2, 2};
  return n;
}

}  // namespace

TEST_CASE("rounding convention: ties toward positive infinity") {
  CHECK(round_half_up(0.5) == 1);
  CHECK(round_half_up(-0.5) == 0);
  CHECK(round_half_up(1.49) == 1);
  CHECK(round_half_up(1.5) == 2);
  CHECK(round_half_up(-1.5) == -1);
}

TEST_CASE("preprocess yields two normalized channels") {
  Volume v = random_volume({12, 10, 8}, 31);
  Tensor pre = preprocess(v, 5.0);
  REQUIRE(pre.shape() == std::vector<int64_t>{2, 12, 10, 8});

  const int64_t n = 12 * 10 * 8;
  for (int c = 0; c < 2; ++c) {
    double sum = 0, sum2 = 0;
    for (int64_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(pre[c * n + i]);
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }

  // constant volumes normalize to all zeros instead of dividing by zero
  Volume flat = Volume::zeros({6, 6, 6}, {1, 1, 1}, VoxelType::f64);
  for (auto& x : flat.data) x = 42.0;
  Tensor zp = preprocess(flat, 5.0);
  for (int64_t i = 0; i < zp.size(); ++i) CHECK(zp[i] == 0);

  // non-finite voxels are rejected with their coordinates
  Volume bad = random_volume({4, 4, 4}, 32);
  bad.data[4 * 4 * 2 + 4 * 1 + 3] = std::numeric_limits<double>::quiet_NaN();
  try {
    preprocess(bad, 5.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Runtime);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("padding is centered with the extra voxel on the high side") {
  {
    Tensor t({1, 250, 250, 250});
    PadResult r = pad_center(t, {256, 256, 256});
    CHECK(r.origin_offset == std::array<int64_t, 3>{3, 3, 3});
    CHECK(r.warnings.empty());
  }
  {
    Tensor t({1, 160, 240, 256});
    PadResult r = pad_center(t, {256, 256, 256});
    CHECK(r.origin_offset == std::array<int64_t, 3>{48, 8, 0});
  }
  {
    // value placement round-trips
    Rng rng(33);
    Tensor t({2, 5, 6, 7});
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<real>(rng.uniform(-1, 1));
    PadResult r = pad_center(t, {8, 8, 8});
    REQUIRE(r.padded.shape() == std::vector<int64_t>{2, 8, 8, 8});
    const auto off = r.origin_offset;
    CHECK(off == std::array<int64_t, 3>{1, 1, 0});
    double border = 0;
    for (int64_t c = 0; c < 2; ++c) {
      for (int64_t x = 0; x < 5; ++x) {
        for (int64_t y = 0; y < 6; ++y) {
          for (int64_t z = 0; z < 7; ++z) {
            CHECK(r.padded.at({c, x + off[0], y + off[1], z + off[2]}) == t.at({c, x, y, z}));
          }
        }
      }
      border += std::abs(static_cast<double>(r.padded.at({c, 0, 0, 7})));
    }
    CHECK(border == 0);
  }
  {
    // oversize input is center-cropped with a warning and a negative offset
    Tensor t({1, 300, 256, 256});
    PadResult r = pad_center(t, {256, 256, 256});
    CHECK(r.origin_offset[0] == -22);
    CHECK_FALSE(r.warnings.empty());
  }
}

TEST_CASE("coarse grid coordinates map to cell centers in the original frame") {
  Landmark c;
  c.space = Space::coarse_grid;
  c.pos = {0, 0, 0};
  Landmark o = coarse_to_original(c, {0, 0, 0}, 4);
  CHECK(o.space == Space::original);
  CHECK(o.pos == std::array<double, 3>{1.5, 1.5, 1.5});

  c.pos = {32, 32, 32};
  o = coarse_to_original(c, {3, 3, 3}, 4);
  CHECK(o.pos == std::array<double, 3>{126.5, 126.5, 126.5});

  // wrong space is a contract violation
  Landmark wrong;
  wrong.space = Space::original;
  CHECK_THROWS_AS(coarse_to_original(wrong, {0, 0, 0}, 4), Error);
}

TEST_CASE("coarse class round-trip stays within half a cell") {
  Rng rng(34);
  const int64_t factor = 4, classes = 16;
  for (int i = 0; i < 500; ++i) {
    const double coord = rng.uniform(0, static_cast<double>(factor * classes - 1));
    const int64_t k = coarse_class_of(coord, factor, classes);
    CHECK(k >= 0);
    CHECK(k < classes);
    const double center = static_cast<double>(k * factor) + (factor - 1) / 2.0;
    CHECK(std::abs(coord - center) <= factor / 2.0 + 1e-9);
  }
  // clamping at the edges
  CHECK(coarse_class_of(-50, 4, 16) == 0);
  CHECK(coarse_class_of(1e6, 4, 16) == 15);
}

TEST_CASE("fine classes live on a 1/n grid") {
  CHECK(fine_class_of(3.26, 4, 128) == 13);
  CHECK(fine_class_of(0.0, 4, 128) == 0);
  CHECK(fine_class_of(-2.0, 4, 128) == 0);
  CHECK(fine_class_of(1e9, 4, 128) == 127);
  CHECK(fine_class_of(5.0, 1, 8) == 5);
}

TEST_CASE("window extraction copies voxels exactly and clamps at the borders") {
  Rng rng(35);
  Tensor pre({2, 12, 12, 12});
  for (int64_t i = 0; i < pre.size(); ++i) pre[i] = static_cast<real>(rng.uniform(-1, 1));

  Landmark center;
  center.space = Space::original;
  center.pos = {6.2, 0.0, 11.0};
  WindowResult w = extract_window(pre, center, {8, 8, 8});
  CHECK(w.origin == std::array<int64_t, 3>{2, 0, 4});  // clamped on axes 1 and 2
  for (int64_t c = 0; c < 2; ++c) {
    for (int64_t x = 0; x < 8; ++x) {
      for (int64_t y = 0; y < 8; ++y) {
        for (int64_t z = 0; z < 8; ++z) {
          CHECK(w.window.at({c, x, y, z}) ==
                pre.at({c, x + w.origin[0], y + w.origin[1], z + w.origin[2]}));
        }
      }
    }
  }

  // a window larger than the volume cannot be extracted
  CHECK_THROWS_AS(extract_window(pre, center, {16, 8, 8}), Error);
}

TEST_CASE("parabola refinement matches the closed form and clamps") {
  // (0.2, 0.5, 0.3): offset = (0.2-0.3) / (2*(0.2-1.0+0.3)) = 0.1
  Tensor p({5}, {real(0.0), real(0.2), real(0.5), real(0.3), real(0.0)});
  CHECK(std::abs(parabola_refine(p, 2) - 2.1) < 1e-12);

  // symmetric neighbors leave the peak where it is
  Tensor sym({3}, {real(0.2), real(0.6), real(0.2)});
  CHECK(parabola_refine(sym, 1) == 1.0);

  // boundary peaks are returned unchanged
  Tensor edge({4}, {real(0.7), real(0.2), real(0.05), real(0.05)});
  CHECK(parabola_refine(edge, 0) == 0.0);
  CHECK(parabola_refine(edge, 3) == 3.0);

  // flat (degenerate curvature) stays put
  Tensor flat({3}, {real(0.25), real(0.25), real(0.25)});
  CHECK(parabola_refine(flat, 1) == 1.0);

  // offsets never exceed half a class
  Tensor steep({3}, {real(0.0), real(0.5), real(0.4999999)});
  const double r = parabola_refine(steep, 1);
  CHECK(r >= 0.5);
  CHECK(r <= 1.5);
}

TEST_CASE("parabola vertex agrees with dense maximization of the quadratic") {
  Rng rng(36);
  for (int i = 0; i < 200; ++i) {
    double pm = rng.uniform(0.0, 1.0), p0 = rng.uniform(0.0, 1.0), pp = rng.uniform(0.0, 1.0);
    // force a genuine interior maximum
    p0 = std::max({pm, p0, pp}) + rng.uniform(0.01, 0.5);
    Tensor probs({3}, {static_cast<real>(pm), static_cast<real>(p0), static_cast<real>(pp)});
    const double got = parabola_refine(probs, 1);

    // dense scan of the interpolating quadratic q(t) through the three points
    const double a = 0.5 * (pm + pp) - p0;
    const double b = 0.5 * (pp - pm);
    double best_t = -1, best_q = -1e300;
    for (int k = 0; k <= 200000; ++k) {
      const double t = -1.0 + 2.0 * k / 200000.0;
      const double q = a * t * t + b * t + p0;
      if (q > best_q) {
        best_q = q;
        best_t = t;
      }
    }
    CHECK(std::abs(got - (1.0 + best_t)) < 1e-4);  // scan resolution 1e-5
  }
}

TEST_CASE("pipeline configuration validation") {
  PipelineConfig p = mini_pipeline();
  p.validate();
  CHECK(p.coarse_grid_extents() == std::array<int64_t, 3>{8, 8, 8});
  CHECK(p.input_conv_kernel() == 5);

  PipelineConfig bad = p;
  bad.padded_extents = {16, 16, 18};  // != window * factor
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("full pipeline smoke test on random weights") {
  PipelineConfig pcfg = mini_pipeline();
  NetProfile profile = mini_profile();
  CoarseModel coarse = CoarseModel::make(pcfg, profile);
  FineModel fine = FineModel::make(pcfg, profile, pcfg.superres_n);
  Rng rng(37);
  init_coarse_model(coarse, rng);
  init_fine_model(fine, rng);

  Volume v = random_volume({12, 14, 10}, 38);
  LocalizeResult r = localize(v, coarse, fine, pcfg, /*use_parabola=*/true);

  CHECK(r.voxel.space == Space::original);
  for (int a = 0; a < 3; ++a) {
    CHECK(r.voxel.pos[a] >= 0);
    CHECK(r.voxel.pos[a] <= static_cast<double>(v.extents[a] - 1));
    CHECK(std::isfinite(r.voxel.pos[a]));
    CHECK(r.mm[a] == r.voxel.pos[a] * v.spacing[a]);
  }
  r.coarse_dist.validate();
  r.fine_dist.validate();

  // identical call gives identical output (no hidden state)
  LocalizeResult r2 = localize(v, coarse, fine, pcfg, true);
  CHECK(r.voxel.pos == r2.voxel.pos);

  // stage errors carry the stage name
  Volume tiny = random_volume({4, 4, 4}, 39);
  try {
    // window 8 > volume 4 on every axis
    localize(tiny, coarse, fine, pcfg, true);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("extract_window") != std::string::npos);
  }
}
