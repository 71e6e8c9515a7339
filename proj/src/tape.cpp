#include "degas/tape.hpp"

#include "degas/error.hpp"

namespace degas {

const Tensor& Var::value() const {
  if (!tape_) throw Error("use of an unbound Var");
  return tape_->value(id_);
}

const Tensor* GradientMap::find(const Parameter& p) const {
  auto it = params_.find(&p);
  return it == params_.end() ? nullptr : &it->second;
}

const Tensor* GradientMap::find(Var v) const {
  auto it = leaves_.find(v.id());
  return it == leaves_.end() ? nullptr : &it->second;
}

const Tensor& GradientMap::at(const Parameter& p) const {
  if (const Tensor* t = find(p)) return *t;
  throw Error("no gradient recorded for parameter");
}

const Tensor& GradientMap::at(Var v) const {
  if (const Tensor* t = find(v)) return *t;
  throw Error("no gradient recorded for leaf " + std::to_string(v.id()));
}

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = true;
  node.trainable_leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& p) {
  Node node;
  node.external = &p.value;
  node.requires_grad = !frozen(p.group);
  node.trainable_leaf = node.requires_grad;
  node.param = &p;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::freeze(ParamGroup group) {
  if (group == ParamGroup::weights) frozen_weights_ = true;
  else frozen_arch_ = true;
}

bool Tape::frozen(ParamGroup group) const {
  return group == ParamGroup::weights ? frozen_weights_ : frozen_arch_;
}

Var Tape::record(Tensor output, const std::vector<Var>& inputs, BackwardFn fn) {
  Node node;
  node.owned = std::move(output);
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape_ != this) throw Error("Var belongs to a different tape");
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (node.requires_grad) node.fn = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.owned;
}

GradientMap Tape::backward(Var loss) {
  if (consumed_) throw Error("backward called twice on the same tape");
  if (loss.tape_ != this) throw Error("loss was not recorded on this tape");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_to_string(value(loss.id()).shape()));
  }
  consumed_ = true;

  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id()] = Tensor(value(loss.id()).shape(), 1.0);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.fn || grads[i].empty()) continue;
    BackwardContext ctx{grads[i], value(i), {}, {}};
    ctx.inputs.reserve(node.inputs.size());
    ctx.input_grads.reserve(node.inputs.size());
    for (std::size_t in : node.inputs) {
      ctx.inputs.push_back(&value(in));
      if (nodes_[in].requires_grad) {
        if (grads[in].empty()) grads[in] = Tensor::zeros(value(in).shape());
        ctx.input_grads.push_back(&grads[in]);
      } else {
        ctx.input_grads.push_back(nullptr);
      }
    }
    node.fn(ctx);
    // Interior gradients are no longer needed once propagated.
    if (!node.trainable_leaf) grads[i] = Tensor();
  }

  GradientMap out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (!node.trainable_leaf) continue;
    Tensor g = grads[i].empty() ? Tensor::zeros(value(i).shape()) : std::move(grads[i]);
    if (node.param) {
      auto [it, inserted] = out.params_.try_emplace(node.param, g);
      if (!inserted) it->second += g;
    } else {
      out.leaves_.emplace(i, std::move(g));
    }
  }
  return out;
}

}  // namespace degas
