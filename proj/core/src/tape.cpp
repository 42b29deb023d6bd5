#include "cryopose/tape.hpp"

namespace cryopose::ad {

const Tensor& Var::value() const {
  CP_CHECK_GRAPH(valid(), "value() on a Var with no tape");
  return tape_->value(*this);
}

const Tensor& Var::grad() const {
  CP_CHECK_GRAPH(valid(), "grad() on a Var with no tape");
  return tape_->grad(*this);
}

bool Var::has_grad() const { return valid() && tape_->has_grad(*this); }

bool Var::requires_grad() const { return valid() && tape_->requires_grad(*this); }

const Tape::Node& Tape::node(const Var& v) const {
  CP_CHECK_GRAPH(v.tape() == this, "Var does not belong to this tape");
  CP_CHECK_GRAPH(v.id() >= 0 && v.id() < static_cast<int>(nodes_.size()),
                 "Var id out of range");
  return nodes_[static_cast<std::size_t>(v.id())];
}

Tape::Node& Tape::node(const Var& v) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(v));
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  CP_CHECK(value.defined(), Error, "leaf() with an undefined tensor");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  CP_CHECK(value.defined(), Error, "record() with an undefined tensor");
  bool needs = false;
  for (const Var& in : inputs) {
    CP_CHECK_GRAPH(in.tape() == this, "op input recorded on a different tape");
    CP_CHECK_GRAPH(in.id() < static_cast<int>(nodes_.size()),
                   "op input must be recorded before its consumer");
    needs = needs || nodes_[static_cast<std::size_t>(in.id())].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(const Var& loss) {
  CP_CHECK_GRAPH(loss.valid() && loss.tape() == this,
                 "backward() requires a Var recorded on this tape");
  CP_CHECK_GRAPH(!backward_ran_, "backward() already ran on this tape");
  const Node& seed = node(loss);
  CP_CHECK_GRAPH(seed.value.numel() == 1, "backward() requires a scalar loss");
  backward_ran_ = true;
  if (!seed.requires_grad) return;  // loss does not depend on any leaf

  Tensor& g = grad_ref(loss);
  if (g.is_complex()) {
    g.mutable_complex()[0] = cdouble{1.0, 0.0};
  } else {
    g.mutable_real()[0] = 1.0;
  }
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

const Tensor& Tape::value(const Var& v) const { return node(v).value; }

const Tensor& Tape::grad(const Var& v) const {
  const Node& n = node(v);
  CP_CHECK_GRAPH(n.has_grad,
                 "gradient not available; run backward() on a loss that "
                 "depends on this Var first");
  return n.grad;
}

bool Tape::has_grad(const Var& v) const { return node(v).has_grad; }

bool Tape::requires_grad(const Var& v) const { return node(v).requires_grad; }

Tensor& Tape::grad_ref(const Var& v) {
  Node& n = node(v);
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.shape(), n.value.dtype());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accum(const Var& v, const Tensor& delta) {
  if (!requires_grad(v)) return;
  Tensor& g = grad_ref(v);
  CP_CHECK_SHAPE(g.same_shape(delta) && g.dtype() == delta.dtype(),
                 "gradient accumulation shape/dtype mismatch");
  const std::int64_t n = g.numel();
  if (g.is_complex()) {
    cdouble* dst = g.mutable_complex();
    const cdouble* src = delta.complex_data();
    for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
  } else {
    double* dst = g.mutable_real();
    const double* src = delta.real_data();
    for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
  }
}

}  // namespace cryopose::ad
