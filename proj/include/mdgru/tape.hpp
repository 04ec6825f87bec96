// Reverse-mode differentiation: a tape of executed operations replayed
// backward in exact reverse execution order.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "mdgru/tensor.hpp"

namespace mdgru {

// Handle to a tensor living on a Tape.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Trainable tensor with persistent gradient storage.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0); }
};

class Tape {
 public:
  Tape() = default;
  // A non-recording tape evaluates values only; backward is a state error.
  explicit Tape(bool recording) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that never receives gradients.
  Var constant(Tensor t);
  // Leaf with an optional gradient slot (useful for checking input gradients).
  Var input(Tensor t, bool needs_grad);
  // Trainable leaf; after backward() its gradient is accumulated into p.grad.
  Var parameter(Parameter& p);

  const Tensor& val(Var v) const;
  bool needs_grad(Var v) const;
  bool recording() const { return recording_; }

  // Gradient slot for v, allocated as zeros on first access.
  Tensor& grad(Var v);
  bool has_grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and replays all recorded operations in reverse.
  // `loss` must be a scalar. Accumulates into bound Parameter::grad.
  void backward(Var loss);

  size_t op_count() const { return nodes_.size(); }

  // --- used by ops ---
  Var emit(Tensor&& value, bool needs);
  void record(std::function<void(Tape&)> fn);

 private:
  struct Slot {
    Tensor value;
    Tensor grad;
    bool grad_alloc = false;
    bool needs = false;
    Parameter* bound = nullptr;
  };

  Slot& slot(Var v);
  const Slot& slot(Var v) const;

  std::deque<Slot> slots_;
  std::vector<std::function<void(Tape&)>> nodes_;
  bool recording_ = true;
  bool consumed_ = false;
};

}  // namespace mdgru
