#include "mdgru/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "mdgru/kernels.hpp"

namespace mdgru {

namespace {

// Stage-tagged error propagation for localize().
template <class F>
auto staged(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(stage) + ": " + e.what());
  }
}

std::vector<real> gaussian_taps(double sigma) {
  const int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(3.0 * sigma)));
  std::vector<real> taps(static_cast<size_t>(2 * radius + 1));
  real sum = 0;
  for (int64_t i = -radius; i <= radius; ++i) {
    const real v = static_cast<real>(
        std::exp(-0.5 * (static_cast<double>(i) / sigma) * (static_cast<double>(i) / sigma)));
    taps[static_cast<size_t>(i + radius)] = v;
    sum += v;
  }
  for (real& t : taps) t /= sum;
  return taps;
}

// Zero mean, unit deviation in place; deviation floored at 1e-8.
void normalize(real* v, int64_t n) {
  double mean = 0;
  for (int64_t i = 0; i < n; ++i) mean += v[i];
  mean /= static_cast<double>(n);
  double var = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(v[i]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double denom = std::max(std::sqrt(var), 1e-8);
  for (int64_t i = 0; i < n; ++i) {
    v[i] = static_cast<real>((static_cast<double>(v[i]) - mean) / denom);
  }
}

struct PadBounds {
  int64_t dst_lo;  // where the kept block starts in the output
  int64_t src_lo;  // where it starts in the input
  int64_t len;     // kept extent
  int64_t offset;  // original origin in output coordinates (negative if cropped)
};

PadBounds pad_bounds(int64_t in, int64_t out) {
  PadBounds b;
  if (in <= out) {
    b.dst_lo = (out - in) / 2;
    b.src_lo = 0;
    b.len = in;
    b.offset = b.dst_lo;
  } else {
    b.dst_lo = 0;
    b.src_lo = (in - out) / 2;
    b.len = out;
    b.offset = -b.src_lo;
  }
  return b;
}

LocNetConfig coarse_net_config(const PipelineConfig& pcfg, const NetProfile& profile) {
  LocNetConfig c;
  c.input_extents = pcfg.coarse_grid_extents();
  c.input_channels = pcfg.input_conv_channels;
  c.mdgru_channels = profile.mdgru_channels;
  c.pointwise_channels = profile.pointwise_channels;
  c.cgru_kernel = profile.cgru_kernel;
  c.dropconnect_rate = profile.dropconnect_rate;
  c.classes_per_axis = pcfg.coarse_grid_extents();
  c.superres_factor = 1;
  return c;
}

LocNetConfig fine_net_config(const PipelineConfig& pcfg, const NetProfile& profile, int64_t n) {
  LocNetConfig c;
  c.input_extents = pcfg.window_extents;
  c.input_channels = 2;
  c.mdgru_channels = profile.mdgru_channels;
  c.pointwise_channels = profile.pointwise_channels;
  c.cgru_kernel = profile.cgru_kernel;
  c.dropconnect_rate = profile.dropconnect_rate;
  for (int a = 0; a < 3; ++a) {
    c.classes_per_axis[static_cast<size_t>(a)] = pcfg.window_extents[static_cast<size_t>(a)] * n;
  }
  c.superres_factor = n;
  return c;
}

Landmark decode(const CoordinateDistribution& dist, int64_t n, bool use_parabola, Space space) {
  const auto peak = argmax_coordinate(dist);
  Landmark lm;
  lm.space = space;
  for (int a = 0; a < 3; ++a) {
    double pos = static_cast<double>(peak[static_cast<size_t>(a)]);
    if (use_parabola) pos = parabola_refine(dist.axis[static_cast<size_t>(a)], peak[static_cast<size_t>(a)]);
    lm.pos[static_cast<size_t>(a)] = pos / static_cast<double>(n);
  }
  return lm;
}

}  // namespace

std::array<int64_t, 3> PipelineConfig::coarse_grid_extents() const {
  return {padded_extents[0] / coarse_factor, padded_extents[1] / coarse_factor,
          padded_extents[2] / coarse_factor};
}

void PipelineConfig::validate() const {
  if (coarse_factor < 1) throw_config("pipeline: coarse_factor must be >= 1");
  if (superres_n < 1) throw_config("pipeline: superres_n must be >= 1");
  if (input_conv_channels < 1) throw_config("pipeline: input_conv_channels must be >= 1");
  if (!(sigma_hp > 0)) throw_config("pipeline: sigma_hp must be > 0");
  for (int a = 0; a < 3; ++a) {
    const int64_t w = window_extents[static_cast<size_t>(a)];
    const int64_t p = padded_extents[static_cast<size_t>(a)];
    if (w < 8) throw_config("pipeline: window extents must be >= 8");
    if (p != w * coarse_factor) {
      throw_config("pipeline: padded extent " + std::to_string(p) + " != window extent " +
                   std::to_string(w) + " x coarse factor " + std::to_string(coarse_factor) +
                   " on axis " + std::to_string(a));
    }
  }
}

CoarseModel CoarseModel::make(const PipelineConfig& pcfg, const NetProfile& profile) {
  pcfg.validate();
  CoarseModel m;
  m.input_spec.strides.assign(3, pcfg.input_conv_stride());
  m.input_spec.kernel_extents.assign(3, pcfg.input_conv_kernel());
  m.input_spec.in_channels = 2;
  m.input_spec.out_channels = pcfg.input_conv_channels;
  const int64_t k = pcfg.input_conv_kernel();
  m.in_w = Parameter("coarse/input_conv/w",
                     Tensor({pcfg.input_conv_channels, 2, k, k, k}));
  m.in_b = Parameter("coarse/input_conv/b", Tensor({pcfg.input_conv_channels}));
  m.net = LocNet::make(coarse_net_config(pcfg, profile), "coarse");
  return m;
}

std::vector<Parameter*> CoarseModel::all_params() {
  std::vector<Parameter*> out{&in_w, &in_b};
  for (Parameter* p : net.all_params()) out.push_back(p);
  return out;
}

FineModel FineModel::make(const PipelineConfig& pcfg, const NetProfile& profile, int64_t n) {
  pcfg.validate();
  if (n < 1) throw_config("fine model: superresolution factor must be >= 1");
  FineModel m;
  m.n = n;
  m.net = LocNet::make(fine_net_config(pcfg, profile, n), "fine");
  return m;
}

std::vector<Parameter*> FineModel::all_params() { return net.all_params(); }

Tensor preprocess(const Volume& v, double sigma_hp) {
  v.validate();
  if (static_cast<int64_t>(v.data.size()) != v.size()) {
    throw_shape("preprocess: volume has no data");
  }
  if (!(sigma_hp > 0)) throw_config("preprocess: sigma_hp must be > 0");
  const int64_t nx = v.extents[0], ny = v.extents[1], nz = v.extents[2];
  const int64_t n = v.size();

  // Repack from file order (x fastest) to tensor order (z fastest).
  Tensor orig({nx, ny, nz});
  for (int64_t x = 0; x < nx; ++x) {
    for (int64_t y = 0; y < ny; ++y) {
      for (int64_t z = 0; z < nz; ++z) {
        const double val = v.at(x, y, z);
        if (!std::isfinite(val)) {
          throw_error(ErrorKind::Runtime, "preprocess: non-finite intensity at (" +
                                              std::to_string(x) + ", " + std::to_string(y) + ", " +
                                              std::to_string(z) + ")");
        }
        orig.at({x, y, z}) = static_cast<real>(val);
      }
    }
  }

  const std::vector<real> taps = gaussian_taps(sigma_hp);
  const int64_t dims[3] = {nx, ny, nz};
  Tensor blur({nx, ny, nz});
  Tensor tmp({nx, ny, nz});
  kernels::blur_axis(dims, 0, taps, orig.data(), blur.data());
  kernels::blur_axis(dims, 1, taps, blur.data(), tmp.data());
  kernels::blur_axis(dims, 2, taps, tmp.data(), blur.data());

  Tensor out({2, nx, ny, nz});
  real* ch0 = out.data();
  real* ch1 = out.data() + n;
  for (int64_t i = 0; i < n; ++i) {
    ch0[i] = orig[i];
    ch1[i] = orig[i] - blur[i];
  }
  normalize(ch0, n);
  normalize(ch1, n);
  return out;
}

PadResult pad_center(const Tensor& channels_first, std::array<int64_t, 3> padded_extents) {
  if (channels_first.rank() != 4) {
    throw_shape("pad_center: expected (channels, X, Y, Z), got " + channels_first.shape_str());
  }
  const int64_t c = channels_first.extent(0);
  PadBounds b[3];
  bool cropped = false;
  for (int a = 0; a < 3; ++a) {
    b[a] = pad_bounds(channels_first.extent(a + 1), padded_extents[static_cast<size_t>(a)]);
    cropped = cropped || b[a].offset < 0;
  }
  PadResult r;
  r.padded = Tensor({c, padded_extents[0], padded_extents[1], padded_extents[2]});
  for (int a = 0; a < 3; ++a) r.origin_offset[static_cast<size_t>(a)] = b[a].offset;
  if (cropped) {
    r.warnings.push_back(
        "pad_center: input " + std::to_string(channels_first.extent(1)) + "x" +
        std::to_string(channels_first.extent(2)) + "x" + std::to_string(channels_first.extent(3)) +
        " exceeds padded extents; center-cropped");
  }
  const int64_t in_y = channels_first.extent(2), in_z = channels_first.extent(3);
  const int64_t out_y = padded_extents[1], out_z = padded_extents[2];
  const real* src = channels_first.data();
  real* dst = r.padded.data();
  const int64_t in_vol = channels_first.extent(1) * in_y * in_z;
  const int64_t out_vol = padded_extents[0] * out_y * out_z;
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t x = 0; x < b[0].len; ++x) {
      for (int64_t y = 0; y < b[1].len; ++y) {
        const real* s =
            src + ch * in_vol + ((b[0].src_lo + x) * in_y + (b[1].src_lo + y)) * in_z + b[2].src_lo;
        real* d = dst + ch * out_vol +
                  ((b[0].dst_lo + x) * out_y + (b[1].dst_lo + y)) * out_z + b[2].dst_lo;
        std::copy(s, s + b[2].len, d);
      }
    }
  }
  return r;
}

PadVolumeResult pad_center(const Volume& v, std::array<int64_t, 3> padded_extents) {
  v.validate();
  PadBounds b[3];
  bool cropped = false;
  for (int a = 0; a < 3; ++a) {
    b[a] = pad_bounds(v.extents[static_cast<size_t>(a)], padded_extents[static_cast<size_t>(a)]);
    cropped = cropped || b[a].offset < 0;
  }
  PadVolumeResult r;
  r.padded = Volume::zeros(padded_extents, v.spacing, v.dtype);
  for (int a = 0; a < 3; ++a) r.origin_offset[static_cast<size_t>(a)] = b[a].offset;
  if (cropped) r.warnings.push_back("pad_center: input exceeds padded extents; center-cropped");
  for (int64_t z = 0; z < b[2].len; ++z) {
    for (int64_t y = 0; y < b[1].len; ++y) {
      for (int64_t x = 0; x < b[0].len; ++x) {
        r.padded.at(b[0].dst_lo + x, b[1].dst_lo + y, b[2].dst_lo + z) =
            v.at(b[0].src_lo + x, b[1].src_lo + y, b[2].src_lo + z);
      }
    }
  }
  return r;
}

StageOutput coarse_stage(const Tensor& padded, CoarseModel& m) {
  Tape tp(false);
  Var x = tp.constant(padded);
  Var sub = ops::conv(tp, x, tp.parameter(m.in_w), tp.parameter(m.in_b), m.input_spec);
  DistVars d = locnet_forward(tp, sub, m.net, /*training=*/false);
  StageOutput out;
  out.dist = to_distribution(tp, d);
  out.lm = decode(out.dist, /*n=*/1, /*use_parabola=*/false, Space::coarse_grid);
  return out;
}

Landmark coarse_to_original(const Landmark& c, std::array<int64_t, 3> origin_offset,
                            int64_t factor) {
  require_space(c, Space::coarse_grid, "coarse_to_original");
  Landmark out;
  out.space = Space::original;
  for (int a = 0; a < 3; ++a) {
    out.pos[static_cast<size_t>(a)] = c.pos[static_cast<size_t>(a)] * static_cast<double>(factor) +
                                      static_cast<double>(factor - 1) / 2.0 -
                                      static_cast<double>(origin_offset[static_cast<size_t>(a)]);
  }
  return out;
}

WindowResult extract_window(const Tensor& channels_first, const Landmark& center,
                            std::array<int64_t, 3> window_extents) {
  require_space(center, Space::original, "extract_window");
  if (channels_first.rank() != 4) {
    throw_shape("extract_window: expected (channels, X, Y, Z), got " +
                channels_first.shape_str());
  }
  const int64_t c = channels_first.extent(0);
  int64_t origin[3];
  for (int a = 0; a < 3; ++a) {
    const int64_t n = channels_first.extent(a + 1);
    const int64_t w = window_extents[static_cast<size_t>(a)];
    if (w > n) {
      throw_dim("extract_window: window extent " + std::to_string(w) + " exceeds volume extent " +
                std::to_string(n) + " on axis " + std::to_string(a));
    }
    const int64_t o = round_half_up(center.pos[static_cast<size_t>(a)]) - w / 2;
    origin[a] = std::clamp<int64_t>(o, 0, n - w);
  }
  WindowResult r;
  r.window = Tensor({c, window_extents[0], window_extents[1], window_extents[2]});
  for (int a = 0; a < 3; ++a) r.origin[static_cast<size_t>(a)] = origin[a];
  const int64_t in_y = channels_first.extent(2), in_z = channels_first.extent(3);
  const int64_t in_vol = channels_first.extent(1) * in_y * in_z;
  const int64_t wx = window_extents[0], wy = window_extents[1], wz = window_extents[2];
  const real* src = channels_first.data();
  real* dst = r.window.data();
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t x = 0; x < wx; ++x) {
      for (int64_t y = 0; y < wy; ++y) {
        const real* s =
            src + ch * in_vol + ((origin[0] + x) * in_y + (origin[1] + y)) * in_z + origin[2];
        std::copy(s, s + wz, dst + ((ch * wx + x) * wy + y) * wz);
      }
    }
  }
  return r;
}

double parabola_refine(const Tensor& probs, int64_t peak) {
  if (probs.rank() != 1) throw_shape("parabola_refine: expects a 1-D tensor");
  if (peak < 0 || peak >= probs.size()) {
    throw_index("parabola_refine: peak " + std::to_string(peak) + " out of range [0, " +
                std::to_string(probs.size()) + ")");
  }
  if (peak == 0 || peak == probs.size() - 1) return static_cast<double>(peak);
  const double pm = static_cast<double>(probs[peak - 1]);
  const double p0 = static_cast<double>(probs[peak]);
  const double pp = static_cast<double>(probs[peak + 1]);
  const double denom = 2.0 * (pm - 2.0 * p0 + pp);
  if (std::abs(denom) < 1e-12) return static_cast<double>(peak);
  const double offset = std::clamp((pm - pp) / denom, -0.5, 0.5);
  return static_cast<double>(peak) + offset;
}

StageOutput fine_stage(const Tensor& window, FineModel& m, bool use_parabola) {
  Tape tp(false);
  Var x = tp.constant(window);
  DistVars d = locnet_forward(tp, x, m.net, /*training=*/false);
  StageOutput out;
  out.dist = to_distribution(tp, d);
  out.lm = decode(out.dist, m.n, use_parabola, Space::window);
  return out;
}

LocalizeResult localize(const Volume& v, CoarseModel& coarse, FineModel& fine,
                        const PipelineConfig& pcfg, bool use_parabola) {
  pcfg.validate();
  LocalizeResult r;
  const Tensor pre = staged("preprocess", [&] { return preprocess(v, pcfg.sigma_hp); });
  PadResult pad = staged("pad", [&] { return pad_center(pre, pcfg.padded_extents); });
  r.warnings = pad.warnings;

  StageOutput co = staged("coarse_stage", [&] { return coarse_stage(pad.padded, coarse); });
  r.coarse_dist = std::move(co.dist);
  r.coarse_voxel = staged("coarse_to_original", [&] {
    return coarse_to_original(co.lm, pad.origin_offset, pcfg.coarse_factor);
  });

  WindowResult win = staged("extract_window", [&] {
    return extract_window(pre, r.coarse_voxel, pcfg.window_extents);
  });
  r.window_origin = win.origin;

  StageOutput fo = staged("fine_stage", [&] { return fine_stage(win.window, fine, use_parabola); });
  r.fine_dist = std::move(fo.dist);

  r.voxel.space = Space::original;
  for (size_t a = 0; a < 3; ++a) {
    // The top classes of a window flush against the volume edge can point up
    // to half a voxel past the last center; a landmark never lies outside.
    const double hi = static_cast<double>(v.extents[a] - 1);
    const double pos = fo.lm.pos[a] + static_cast<double>(win.origin[a]);
    r.voxel.pos[a] = std::min(std::max(pos, 0.0), hi);
    r.mm[a] = r.voxel.pos[a] * v.spacing[a];
  }
  return r;
}

int64_t coarse_class_of(double padded_coord, int64_t factor, int64_t num_classes) {
  const double center0 = static_cast<double>(factor - 1) / 2.0;
  const int64_t cls = round_half_up((padded_coord - center0) / static_cast<double>(factor));
  return std::clamp<int64_t>(cls, 0, num_classes - 1);
}

int64_t fine_class_of(double window_coord, int64_t n, int64_t num_classes) {
  const int64_t cls = round_half_up(window_coord * static_cast<double>(n));
  return std::clamp<int64_t>(cls, 0, num_classes - 1);
}

}  // namespace mdgru
