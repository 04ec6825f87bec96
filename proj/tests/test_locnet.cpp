#include <cmath>

#include "doctest.h"
#include "mdgru/gradcheck.hpp"
#include "mdgru/locnet.hpp"
#include "mdgru/optim.hpp"
#include "mdgru/rng.hpp"

using namespace mdgru;

namespace {

LocNetConfig mini_config() {
  LocNetConfig cfg;
  cfg.input_extents = {8, 8, 8};
  cfg.input_channels = 2;
  cfg.mdgru_channels = {2, 2, 2};
  cfg.pointwise_channels = {2, 2, 2};
  cfg.stride = 2;
  cfg.cgru_kernel = 3;
  cfg.classes_per_axis = {8, 8, 8};
  cfg.superres_factor = 1;
  cfg.dropconnect_rate = real(0.5);
  return cfg;
}

}  // namespace

TEST_CASE("full-size configuration arithmetic") {
  LocNetConfig cfg;  // defaults: 64^3, 2 channels, 32/64/128, 48/96/192, C=256
  cfg.validate();
  CHECK(cfg.preflatten_extents() == std::array<int64_t, 3>{8, 8, 8});
  CHECK(cfg.flat_size() == 8 * 8 * 8 * 192);
  CHECK(cfg.class_total() == 768);
  CHECK(cfg.fc_widths() == std::array<int64_t, 2>{3072, 768});

  LocNetConfig bad = cfg;
  bad.input_extents = {60, 64, 64};  // not divisible by stride^3
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("parameter inventory and shapes") {
  LocNet net = LocNet::make(mini_config(), "t");
  REQUIRE(net.mdgru.size() == 3);
  REQUIRE(net.pw_w.size() == 3);
  CHECK(net.mdgru[0].directions.size() == 6);
  CHECK(net.pw_w[0].value.shape() == std::vector<int64_t>{2, 2, 1, 1, 1});
  CHECK(net.fc1_w.value.shape() == std::vector<int64_t>{4 * 24, 2});  // flat = 1^3 * 2
  CHECK(net.fc2_w.value.shape() == std::vector<int64_t>{24, 4 * 24});
  // every parameter has a unique name
  std::vector<Parameter*> ps = net.all_params();
  for (size_t i = 0; i < ps.size(); ++i) {
    for (size_t j = i + 1; j < ps.size(); ++j) CHECK(ps[i]->name != ps[j]->name);
  }
}

TEST_CASE("zero output head gives uniform distributions and loss 3 ln C") {
  LocNetConfig cfg = mini_config();
  LocNet net = LocNet::make(cfg, "z");
  Rng rng(21);
  init_locnet(net, rng);
  net.fc2_w.value.fill(0);
  net.fc2_b.value.fill(0);

  Tensor vol({2, 8, 8, 8});
  for (int64_t i = 0; i < vol.size(); ++i) vol[i] = static_cast<real>(rng.uniform(-1, 1));

  Tape tp(false);
  DistVars d = locnet_forward(tp, tp.constant(vol), net, /*training=*/false);
  CoordinateDistribution dist = to_distribution(tp, d);
  dist.validate();
  for (int a = 0; a < 3; ++a) {
    REQUIRE(dist.axis[a].size() == 8);
    for (int64_t i = 0; i < 8; ++i) {
      CHECK(std::abs(static_cast<double>(dist.axis[a][i]) - 1.0 / 8) < 1e-12);
    }
  }
  Var loss = locnet_loss(tp, d, {0, 4, 7});
  CHECK(std::abs(static_cast<double>(tp.val(loss)[0]) - 3 * std::log(8.0)) < 1e-9);
}

TEST_CASE("argmax ties break toward the lower index") {
  CoordinateDistribution d;
  d.axis[0] = Tensor({4}, {real(0.25), real(0.25), real(0.25), real(0.25)});
  d.axis[1] = Tensor({4}, {real(0.1), real(0.4), real(0.4), real(0.1)});
  d.axis[2] = Tensor({4}, {real(0.1), real(0.2), real(0.3), real(0.4)});
  const auto peak = argmax_coordinate(d);
  CHECK(peak == std::array<int64_t, 3>{0, 1, 3});
}

TEST_CASE("forward output shapes and probability simplex") {
  LocNet net = LocNet::make(mini_config(), "p");
  Rng rng(22);
  init_locnet(net, rng);
  Tensor vol({2, 8, 8, 8});
  for (int64_t i = 0; i < vol.size(); ++i) vol[i] = static_cast<real>(rng.uniform(-1, 1));

  Tape tp(false);
  DistVars d = locnet_forward(tp, tp.constant(vol), net, false);
  CoordinateDistribution dist = to_distribution(tp, d);
  dist.validate();  // sums to 1, nonnegative

  // wrong input shape is rejected
  Tape tp2(false);
  CHECK_THROWS_AS(locnet_forward(tp2, tp2.constant(Tensor({2, 8, 8, 4})), net, false), Error);
  CHECK_THROWS_AS(locnet_forward(tp2, tp2.constant(Tensor({1, 8, 8, 8})), net, false), Error);
}

TEST_CASE("training with masks changes the forward value, scaling approximates it") {
  LocNet net = LocNet::make(mini_config(), "m");
  Rng rng(23);
  init_locnet(net, rng);
  Tensor vol({2, 8, 8, 8});
  for (int64_t i = 0; i < vol.size(); ++i) vol[i] = static_cast<real>(rng.uniform(-1, 1));

  Tape tp(false);
  Var x = tp.constant(vol);
  DistVars plain = locnet_forward(tp, x, net, /*training=*/true);  // no masks: raw weights
  DistVars scaled = locnet_forward(tp, x, net, /*training=*/false);
  // rate 0.5 makes inference weights genuinely different from raw ones
  CHECK(max_abs_diff(tp.val(plain.axis[0]), tp.val(scaled.axis[0])) > 0);
}

TEST_CASE("miniature localization net passes sampled finite differences") {
  LocNet net = LocNet::make(mini_config(), "fd");
  Rng rng(24);
  init_locnet(net, rng);
  Tensor vol({2, 8, 8, 8});
  for (int64_t i = 0; i < vol.size(); ++i) vol[i] = static_cast<real>(rng.uniform(-1, 1));

  auto build = [&](Tape& tp) {
    DistVars d = locnet_forward(tp, tp.constant(vol), net, /*training=*/true);
    return locnet_loss(tp, d, {1, 6, 3});
  };
  CHECK(max_relative_grad_error(build, net.all_params(), 1e-5, 3) < 1e-4);
}
