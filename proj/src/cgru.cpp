#include "mdgru/cgru.hpp"

#include <algorithm>

#include "mdgru/error.hpp"

namespace mdgru {

namespace {

std::vector<int64_t> input_kernel_shape(const ConvSpec& s) {
  std::vector<int64_t> shape{s.out_channels, s.in_channels};
  shape.insert(shape.end(), s.kernel_extents.begin(), s.kernel_extents.end());
  return shape;
}

std::vector<int64_t> state_kernel_shape(const ConvSpec& s) {
  std::vector<int64_t> shape{s.out_channels, s.out_channels};
  shape.insert(shape.end(), s.kernel_extents.begin(), s.kernel_extents.end());
  return shape;
}

ConvSpec state_spec(const ConvSpec& s) {
  ConvSpec st;
  st.strides.assign(s.strides.size(), 1);
  st.kernel_extents = s.kernel_extents;
  st.in_channels = s.out_channels;
  st.out_channels = s.out_channels;
  return st;
}

Var effective_kernel(Tape& tp, Parameter& w, const Tensor* mask, real scale) {
  Var v = tp.parameter(w);
  if (mask != nullptr) {
    if (!mask->same_shape(w.value)) {
      throw_shape("dropconnect mask shape " + mask->shape_str() + " vs kernel " +
                  w.value.shape_str() + " (" + w.name + ")");
    }
    v = ops::mul(tp, v, tp.constant(*mask));
  }
  if (scale != 1) v = ops::affine(tp, v, scale, 0);
  return v;
}

struct GateVars {
  Var w_r, w_z, w;  // effective input kernels
  Var b_r, b_z, b;
  Var u_r, u_z, u;
};

GateVars place_params(Tape& tp, CGruParams& p, const WeightMode& mode) {
  GateVars g;
  const Tensor* mr = mode.masks ? &mode.masks->m_r : nullptr;
  const Tensor* mz = mode.masks ? &mode.masks->m_z : nullptr;
  const Tensor* mh = mode.masks ? &mode.masks->m : nullptr;
  g.w_r = effective_kernel(tp, p.w_r, mr, mode.scale);
  g.w_z = effective_kernel(tp, p.w_z, mz, mode.scale);
  g.w = effective_kernel(tp, p.w, mh, mode.scale);
  g.b_r = tp.parameter(p.b_r);
  g.b_z = tp.parameter(p.b_z);
  g.b = tp.parameter(p.b);
  g.u_r = tp.parameter(p.u_r);
  g.u_z = tp.parameter(p.u_z);
  g.u = tp.parameter(p.u);
  return g;
}

// One gate update given precomputed f-terms. h_prev and all f's share shape.
Var gate_update(Tape& tp, Var f_r, Var f_z, Var f_h, Var h_prev, const GateVars& g,
                const ConvSpec& sspec) {
  Var gr = ops::conv_state(tp, h_prev, g.u_r, sspec);
  Var gz = ops::conv_state(tp, h_prev, g.u_z, sspec);
  Var gh = ops::conv_state(tp, h_prev, g.u, sspec);
  Var r = ops::sigmoid(tp, ops::add(tp, f_r, gr));
  Var z = ops::sigmoid(tp, ops::add(tp, f_z, gz));
  Var cand = ops::tanh(tp, ops::add(tp, f_h, ops::mul(tp, r, gh)));
  Var keep = ops::mul(tp, z, h_prev);
  Var blend = ops::mul(tp, ops::affine(tp, z, -1, 1), cand);
  return ops::add(tp, keep, blend);
}

}  // namespace

CGruParams CGruParams::shaped(const ConvSpec& spec, const std::string& prefix) {
  spec.validate();
  CGruParams p;
  p.spec = spec;
  const auto wshape = input_kernel_shape(spec);
  const auto ushape = state_kernel_shape(spec);
  const std::vector<int64_t> bshape{spec.out_channels};
  p.w_r = Parameter(prefix + "/w_r", Tensor(wshape));
  p.w_z = Parameter(prefix + "/w_z", Tensor(wshape));
  p.w = Parameter(prefix + "/w", Tensor(wshape));
  p.u_r = Parameter(prefix + "/u_r", Tensor(ushape));
  p.u_z = Parameter(prefix + "/u_z", Tensor(ushape));
  p.u = Parameter(prefix + "/u", Tensor(ushape));
  p.b_r = Parameter(prefix + "/b_r", Tensor(bshape));
  p.b_z = Parameter(prefix + "/b_z", Tensor(bshape));
  p.b = Parameter(prefix + "/b", Tensor(bshape));
  return p;
}

std::vector<Parameter*> CGruParams::all() {
  return {&w_r, &w_z, &w, &u_r, &u_z, &u, &b_r, &b_z, &b};
}

MdGruLayer MdGruLayer::make(const std::string& prefix, int spatial_rank, int64_t in_channels,
                            int64_t out_channels, int64_t stride, int64_t kernel_extent,
                            real dropconnect_rate) {
  if (spatial_rank < 2 || spatial_rank > 3) {
    throw_config("mdgru layer: spatial rank must be 2 or 3, got " + std::to_string(spatial_rank));
  }
  MdGruLayer layer;
  layer.stride = stride;
  layer.in_channels = in_channels;
  layer.out_channels = out_channels;
  layer.dropconnect_rate = dropconnect_rate;
  ConvSpec spec;
  spec.strides.assign(static_cast<size_t>(spatial_rank) - 1, stride);
  spec.kernel_extents.assign(static_cast<size_t>(spatial_rank) - 1, kernel_extent);
  spec.in_channels = in_channels;
  spec.out_channels = out_channels;
  int di = 0;
  for (int axis = 0; axis < spatial_rank; ++axis) {
    for (Orientation o : {Orientation::forward, Orientation::backward}) {
      Direction d;
      d.time_axis = axis;
      d.orient = o;
      d.params = CGruParams::shaped(spec, prefix + "/dir" + std::to_string(di));
      layer.directions.push_back(std::move(d));
      ++di;
    }
  }
  return layer;
}

std::vector<Parameter*> MdGruLayer::all_params() {
  std::vector<Parameter*> out;
  for (Direction& d : directions) {
    for (Parameter* p : d.params.all()) out.push_back(p);
  }
  return out;
}

Var cgru_step(Tape& tp, Var x_t, Var h_prev, CGruParams& p, const WeightMode& mode) {
  GateVars g = place_params(tp, p, mode);
  Var f_r = ops::conv(tp, x_t, g.w_r, g.b_r, p.spec);
  Var f_z = ops::conv(tp, x_t, g.w_z, g.b_z, p.spec);
  Var f_h = ops::conv(tp, x_t, g.w, g.b, p.spec);
  const Tensor& hv = tp.val(h_prev);
  if (!hv.same_shape(tp.val(f_r))) {
    throw_shape("cgru_step: state shape " + hv.shape_str() +
                " does not match reduced-resolution input term " + tp.val(f_r).shape_str());
  }
  return gate_update(tp, f_r, f_z, f_h, h_prev, g, state_spec(p.spec));
}

Var cgru_sequence(Tape& tp, Var volume, CGruParams& p, int time_axis, Orientation orient,
                  int64_t pool_stride, const WeightMode& mode) {
  const Tensor& vol = tp.val(volume);
  const int rank = vol.rank() - 1;  // spatial axes
  if (rank < 2 || rank > 3) {
    throw_shape("cgru_sequence: volume must be (channels, 2..3 spatial axes), got " +
                vol.shape_str());
  }
  if (time_axis < 0 || time_axis >= rank) {
    throw_index("cgru_sequence: time axis " + std::to_string(time_axis) + " out of range for " +
                std::to_string(rank) + " spatial axes");
  }
  if (static_cast<int>(p.spec.strides.size()) != rank - 1) {
    throw_shape("cgru_sequence: params cover " + std::to_string(p.spec.strides.size()) +
                " slice axes, volume has " + std::to_string(rank - 1));
  }
  const int64_t t_len = vol.extent(1 + time_axis);
  if (pool_stride < 1 || t_len % pool_stride != 0) {
    throw_dim("cgru_sequence: time extent " + std::to_string(t_len) +
              " not divisible by pool stride " + std::to_string(pool_stride));
  }

  GateVars g = place_params(tp, p, mode);

  // All-step input terms in one strided pass: view the slice kernels as
  // full-rank kernels with extent 1 (stride 1) on the time axis. Summation
  // order inside the convolution matches the per-slice path exactly.
  std::vector<int64_t> full_kernel{p.spec.out_channels, p.spec.in_channels};
  ConvSpec full;
  full.in_channels = p.spec.in_channels;
  full.out_channels = p.spec.out_channels;
  size_t si = 0;
  for (int a = 0; a < rank; ++a) {
    if (a == time_axis) {
      full_kernel.push_back(1);
      full.kernel_extents.push_back(1);
      full.strides.push_back(1);
    } else {
      full_kernel.push_back(p.spec.kernel_extents[si]);
      full.kernel_extents.push_back(p.spec.kernel_extents[si]);
      full.strides.push_back(p.spec.strides[si]);
      ++si;
    }
  }
  Var f_all_r = ops::conv(tp, volume, ops::reshape(tp, g.w_r, full_kernel), g.b_r, full);
  Var f_all_z = ops::conv(tp, volume, ops::reshape(tp, g.w_z, full_kernel), g.b_z, full);
  Var f_all_h = ops::conv(tp, volume, ops::reshape(tp, g.w, full_kernel), g.b, full);

  // Initial state: zeros at the reduced slice resolution.
  std::vector<int64_t> hshape{p.spec.out_channels};
  const auto& fshape = tp.val(f_all_r).shape();
  for (int a = 0; a < rank; ++a) {
    if (a != time_axis) hshape.push_back(fshape[static_cast<size_t>(a) + 1]);
  }
  Var h = tp.constant(Tensor(hshape));

  const ConvSpec sspec = state_spec(p.spec);
  std::vector<Var> states(static_cast<size_t>(t_len));
  for (int64_t step = 0; step < t_len; ++step) {
    const int64_t t = orient == Orientation::forward ? step : t_len - 1 - step;
    Var f_r = ops::slice_axis(tp, f_all_r, 1 + time_axis, t);
    Var f_z = ops::slice_axis(tp, f_all_z, 1 + time_axis, t);
    Var f_h = ops::slice_axis(tp, f_all_h, 1 + time_axis, t);
    h = gate_update(tp, f_r, f_z, f_h, h, g, sspec);
    states[static_cast<size_t>(t)] = h;
  }

  // States are stored by ascending volume coordinate, so pooling needs no
  // re-reversal for the backward orientation.
  Var seq = ops::stack0(tp, states);
  Var pooled = ops::avg_pool0(tp, seq, pool_stride);
  return ops::move_axis0(tp, pooled, 1 + time_axis);
}

Var mdgru_forward(Tape& tp, Var volume, MdGruLayer& layer, bool training,
                  const DropMasks* masks) {
  if (layer.directions.empty()) throw_state("mdgru_forward: layer has no directions");
  const Tensor& vol = tp.val(volume);
  if (vol.extent(0) != layer.in_channels) {
    throw_shape("mdgru_forward: volume has " + std::to_string(vol.extent(0)) +
                " channels, layer expects " + std::to_string(layer.in_channels));
  }
  WeightMode mode;
  if (training) {
    mode.masks = masks;
  } else if (layer.dropconnect_rate > 0) {
    mode.scale = 1 - layer.dropconnect_rate;
  }
  Var sum;
  for (Direction& d : layer.directions) {
    Var part = cgru_sequence(tp, volume, d.params, d.time_axis, d.orient, layer.stride, mode);
    sum = sum.valid() ? ops::add(tp, sum, part) : part;
  }
  return sum;
}

}  // namespace mdgru
