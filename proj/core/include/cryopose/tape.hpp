#pragma once

#include <functional>
#include <vector>

#include "cryopose/tensor.hpp"

namespace cryopose::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy. Valid only while its tape is
/// alive; a default-constructed Var belongs to no tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  bool has_grad() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode autodiff tape: an ordered record of primitive operations.
/// Operations execute eagerly; backward() replays the record once in reverse,
/// accumulating gradients into every node that requires them.
///
/// Gradient convention for complex tensors: the stored gradient of z is
/// dL/dRe(z) + i*dL/dIm(z), i.e. the adjoint of each primitive viewed as a
/// real-linear map. For a complex-linear op y = A(z) this is the Hermitian
/// adjoint A^H; gradient descent on real leaves composes exactly with central
/// finite differences.
///
/// A tape and its tensors are confined to one thread at a time; distinct
/// tapes may be used concurrently.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& gout)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Insert an input node.
  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Record one primitive. `inputs` define requires_grad propagation and are
  /// validated to precede the new node; `backward`, given the output
  /// gradient, must accumulate into the inputs via accum()/grad_ref().
  /// The backward function may be empty when no input requires gradients.
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  /// Reverse sweep from `loss` (a scalar). Each recorded op runs exactly
  /// once. May be called once per tape.
  void backward(const Var& loss);
  bool backward_done() const { return backward_ran_; }

  const Tensor& value(const Var& v) const;
  const Tensor& grad(const Var& v) const;
  bool has_grad(const Var& v) const;
  bool requires_grad(const Var& v) const;

  /// Gradient accumulation buffer for v (zeros on first touch, same shape
  /// and dtype as the value). Only meaningful for nodes that require grad.
  Tensor& grad_ref(const Var& v);

  /// grad_ref(v) += delta, checking shape and dtype. No-op when v does not
  /// require gradients.
  void accum(const Var& v, const Tensor& delta);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  const Node& node(const Var& v) const;
  Node& node(const Var& v);

  std::vector<Node> nodes_;
  bool backward_ran_ = false;
};

}  // namespace cryopose::ad
