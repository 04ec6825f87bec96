#include "mdgru/locnet.hpp"

#include <cmath>

#include "mdgru/error.hpp"

namespace mdgru {

namespace {
constexpr real kLreluSlope = real(0.01);
}

void LocNetConfig::validate() const {
  const int64_t total_stride = stride * stride * stride;
  for (int a = 0; a < 3; ++a) {
    if (input_extents[static_cast<size_t>(a)] < 1) throw_config("locnet: extents must be positive");
    if (input_extents[static_cast<size_t>(a)] % total_stride != 0) {
      throw_config("locnet: extent " + std::to_string(input_extents[static_cast<size_t>(a)]) +
                   " not divisible by stride^3 = " + std::to_string(total_stride));
    }
    if (classes_per_axis[static_cast<size_t>(a)] < 1) {
      throw_config("locnet: classes_per_axis must be positive");
    }
  }
  if (input_channels < 1) throw_config("locnet: input_channels must be positive");
  if (stride < 1) throw_config("locnet: stride must be >= 1");
  if (cgru_kernel < 1 || cgru_kernel % 2 == 0) throw_config("locnet: cgru_kernel must be odd");
  if (superres_factor < 1) throw_config("locnet: superres_factor must be >= 1");
  if (dropconnect_rate < 0 || dropconnect_rate >= 1) {
    throw_config("locnet: dropconnect_rate must be in [0, 1)");
  }
  for (int64_t c : mdgru_channels) {
    if (c < 1) throw_config("locnet: mdgru_channels must be positive");
  }
  for (int64_t c : pointwise_channels) {
    if (c < 1) throw_config("locnet: pointwise_channels must be positive");
  }
}

std::array<int64_t, 3> LocNetConfig::preflatten_extents() const {
  const int64_t total_stride = stride * stride * stride;
  return {input_extents[0] / total_stride, input_extents[1] / total_stride,
          input_extents[2] / total_stride};
}

int64_t LocNetConfig::flat_size() const {
  const auto pf = preflatten_extents();
  return pf[0] * pf[1] * pf[2] * pointwise_channels[2];
}

int64_t LocNetConfig::class_total() const {
  return classes_per_axis[0] + classes_per_axis[1] + classes_per_axis[2];
}

std::array<int64_t, 2> LocNetConfig::fc_widths() const {
  return {4 * class_total(), class_total()};
}

void CoordinateDistribution::validate() const {
  for (const Tensor& p : axis) {
    real s = 0;
    for (int64_t i = 0; i < p.size(); ++i) {
      if (p[i] < 0) throw_contract("coordinate distribution has a negative probability");
      s += p[i];
    }
    if (std::abs(s - 1) > real(1e-9)) {
      throw_contract("coordinate distribution sums to " + std::to_string(s));
    }
  }
}

LocNet LocNet::make(const LocNetConfig& cfg, const std::string& prefix) {
  cfg.validate();
  LocNet net;
  net.cfg = cfg;
  int64_t ch = cfg.input_channels;
  for (int c = 0; c < 3; ++c) {
    const int64_t j = cfg.mdgru_channels[static_cast<size_t>(c)];
    const int64_t pw = cfg.pointwise_channels[static_cast<size_t>(c)];
    const std::string cp = prefix + "/comp" + std::to_string(c);
    net.mdgru.push_back(MdGruLayer::make(cp + "/mdgru", 3, ch, j, cfg.stride, cfg.cgru_kernel,
                                         cfg.dropconnect_rate));
    net.pw_w.emplace_back(cp + "/pw_w", Tensor({pw, j, 1, 1, 1}));
    net.pw_b.emplace_back(cp + "/pw_b", Tensor({pw}));
    ch = pw;
  }
  const auto fcw = cfg.fc_widths();
  net.fc1_w = Parameter(prefix + "/fc1_w", Tensor({fcw[0], cfg.flat_size()}));
  net.fc1_b = Parameter(prefix + "/fc1_b", Tensor({fcw[0]}));
  net.fc2_w = Parameter(prefix + "/fc2_w", Tensor({fcw[1], fcw[0]}));
  net.fc2_b = Parameter(prefix + "/fc2_b", Tensor({fcw[1]}));
  return net;
}

std::vector<Parameter*> LocNet::all_params() {
  std::vector<Parameter*> out;
  for (size_t c = 0; c < mdgru.size(); ++c) {
    for (Parameter* p : mdgru[c].all_params()) out.push_back(p);
    out.push_back(&pw_w[c]);
    out.push_back(&pw_b[c]);
  }
  out.push_back(&fc1_w);
  out.push_back(&fc1_b);
  out.push_back(&fc2_w);
  out.push_back(&fc2_b);
  return out;
}

DistVars locnet_forward(Tape& tp, Var volume, LocNet& net, bool training,
                        const LocNetMasks* masks) {
  const Tensor& vol = tp.val(volume);
  const LocNetConfig& cfg = net.cfg;
  if (vol.rank() != 4 || vol.extent(0) != cfg.input_channels ||
      vol.extent(1) != cfg.input_extents[0] || vol.extent(2) != cfg.input_extents[1] ||
      vol.extent(3) != cfg.input_extents[2]) {
    throw_shape("locnet: input " + vol.shape_str() + " does not match configured (" +
                std::to_string(cfg.input_channels) + ", " + std::to_string(cfg.input_extents[0]) +
                ", " + std::to_string(cfg.input_extents[1]) + ", " +
                std::to_string(cfg.input_extents[2]) + ")");
  }
  Var h = volume;
  for (size_t c = 0; c < 3; ++c) {
    h = mdgru_forward(tp, h, net.mdgru[c], training,
                      masks ? &masks->comp[c] : nullptr);
    ConvSpec pw;
    pw.strides = {1, 1, 1};
    pw.kernel_extents = {1, 1, 1};
    pw.in_channels = cfg.mdgru_channels[c];
    pw.out_channels = cfg.pointwise_channels[c];
    h = ops::conv(tp, h, tp.parameter(net.pw_w[c]), tp.parameter(net.pw_b[c]), pw);
    h = ops::tanh(tp, h);
  }
  Var flat = ops::flatten_channels_last(tp, h);
  Var a1 = ops::lrelu(tp, ops::fc(tp, flat, tp.parameter(net.fc1_w), tp.parameter(net.fc1_b)),
                      kLreluSlope);
  Var logits = ops::fc(tp, a1, tp.parameter(net.fc2_w), tp.parameter(net.fc2_b));
  DistVars d;
  int64_t off = 0;
  for (int a = 0; a < 3; ++a) {
    const int64_t n = cfg.classes_per_axis[static_cast<size_t>(a)];
    d.axis[static_cast<size_t>(a)] = ops::softmax(tp, ops::slice_range0(tp, logits, off, n));
    off += n;
  }
  return d;
}

CoordinateDistribution to_distribution(const Tape& tp, const DistVars& d) {
  CoordinateDistribution out;
  for (int a = 0; a < 3; ++a) out.axis[static_cast<size_t>(a)] = tp.val(d.axis[static_cast<size_t>(a)]);
  return out;
}

Var locnet_loss(Tape& tp, const DistVars& d, const std::array<int64_t, 3>& target) {
  Var loss;
  for (int a = 0; a < 3; ++a) {
    Var ce = ops::cross_entropy(tp, d.axis[static_cast<size_t>(a)], target[static_cast<size_t>(a)]);
    loss = loss.valid() ? ops::add(tp, loss, ce) : ce;
  }
  return loss;
}

std::array<int64_t, 3> argmax_coordinate(const CoordinateDistribution& d) {
  std::array<int64_t, 3> out{0, 0, 0};
  for (int a = 0; a < 3; ++a) {
    const Tensor& p = d.axis[static_cast<size_t>(a)];
    int64_t best = 0;
    for (int64_t i = 1; i < p.size(); ++i) {
      if (p[i] > p[best]) best = i;
    }
    out[static_cast<size_t>(a)] = best;
  }
  return out;
}

}  // namespace mdgru
