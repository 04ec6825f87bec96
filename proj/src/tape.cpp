#include "mdgru/tape.hpp"

#include "mdgru/error.hpp"
#include "mdgru/kernels.hpp"

namespace mdgru {

Tape::Slot& Tape::slot(Var v) {
  if (!v.valid() || static_cast<size_t>(v.id) >= slots_.size())
    throw_index("tape: variable id " + std::to_string(v.id) + " is not on this tape");
  return slots_[static_cast<size_t>(v.id)];
}

const Tape::Slot& Tape::slot(Var v) const {
  if (!v.valid() || static_cast<size_t>(v.id) >= slots_.size())
    throw_index("tape: variable id " + std::to_string(v.id) + " is not on this tape");
  return slots_[static_cast<size_t>(v.id)];
}

Var Tape::constant(Tensor t) {
  Slot s;
  s.value = std::move(t);
  s.needs = false;
  slots_.push_back(std::move(s));
  return Var{static_cast<int32_t>(slots_.size() - 1)};
}

Var Tape::input(Tensor t, bool needs_grad) {
  Slot s;
  s.value = std::move(t);
  s.needs = recording_ && needs_grad;
  slots_.push_back(std::move(s));
  return Var{static_cast<int32_t>(slots_.size() - 1)};
}

Var Tape::parameter(Parameter& p) {
  Slot s;
  s.value = p.value;
  s.needs = recording_;
  s.bound = recording_ ? &p : nullptr;
  slots_.push_back(std::move(s));
  return Var{static_cast<int32_t>(slots_.size() - 1)};
}

const Tensor& Tape::val(Var v) const { return slot(v).value; }

bool Tape::needs_grad(Var v) const { return slot(v).needs; }

Tensor& Tape::grad(Var v) {
  Slot& s = slot(v);
  if (!s.grad_alloc) {
    s.grad = Tensor(s.value.shape());
    s.grad_alloc = true;
  }
  return s.grad;
}

bool Tape::has_grad(Var v) const { return slot(v).grad_alloc; }

Var Tape::emit(Tensor&& value, bool needs) {
  Slot s;
  s.value = std::move(value);
  s.needs = recording_ && needs;
  slots_.push_back(std::move(s));
  return Var{static_cast<int32_t>(slots_.size() - 1)};
}

void Tape::record(std::function<void(Tape&)> fn) {
  if (recording_) nodes_.push_back(std::move(fn));
}

void Tape::backward(Var loss) {
  if (!recording_) throw_state("tape: backward on a non-recording tape");
  if (consumed_) throw_state("tape: backward called twice");
  if (!loss.valid()) throw_state("tape: backward on an invalid variable");
  const Slot& ls = slot(loss);
  if (ls.value.size() != 1)
    throw_shape("tape: backward expects a scalar loss, got shape " + ls.value.shape_str());
  consumed_ = true;
  grad(loss)[0] = real(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
  for (Slot& s : slots_) {
    if (s.bound != nullptr && s.grad_alloc) {
      kernels::axpy(s.grad.size(), real(1), s.grad.data(), s.bound->grad.data());
    }
  }
}

}  // namespace mdgru
