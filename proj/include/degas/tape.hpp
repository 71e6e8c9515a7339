#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "degas/tensor.hpp"

namespace degas {

/// Which optimizer owns a parameter.
enum class ParamGroup { weights, architecture };

/// A learnable tensor owned by a network module.
struct Parameter {
  Tensor value;
  ParamGroup group = ParamGroup::weights;
};

class Tape;

/// Handle to a value recorded on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Passed to a node's backward function. input_grads[i] is null when input i
/// does not need a gradient; otherwise the function accumulates into it.
struct BackwardContext {
  const Tensor& grad;
  const Tensor& output;
  std::vector<const Tensor*> inputs;
  std::vector<Tensor*> input_grads;
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Gradients produced by Tape::backward, keyed by trainable leaf.
class GradientMap {
 public:
  const Tensor* find(const Parameter& p) const;
  const Tensor* find(Var v) const;
  const Tensor& at(const Parameter& p) const;
  const Tensor& at(Var v) const;
  bool contains(const Parameter& p) const { return find(p) != nullptr; }
  bool contains(Var v) const { return find(v) != nullptr; }
  std::size_t size() const { return params_.size() + leaves_.size(); }

 private:
  friend class Tape;
  std::unordered_map<const Parameter*, Tensor> params_;
  std::unordered_map<std::size_t, Tensor> leaves_;
};

/// Records primitive operations in execution order for one forward pass and
/// replays them in reverse to compute gradients. backward() may run once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Trainable leaf; its gradient is reported under the returned Var.
  Var leaf(Tensor value);
  /// Leaf bound to a parameter (by reference, no copy). Trainable unless its
  /// group has been frozen on this tape.
  Var parameter(const Parameter& p);

  /// Parameters of this group become constants on subsequent parameter() calls.
  void freeze(ParamGroup group);
  bool frozen(ParamGroup group) const;

  /// Append an interior node. fn may be empty if no input requires grad.
  Var record(Tensor output, const std::vector<Var>& inputs, BackwardFn fn);

  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  const Tensor& value(std::size_t id) const;
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  /// Reverse pass from a scalar loss. Every trainable leaf gets a gradient of
  /// its own shape (zeros if the loss does not depend on it).
  GradientMap backward(Var loss);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn fn;
    bool requires_grad = false;
    bool trainable_leaf = false;
    const Parameter* param = nullptr;
  };

  std::deque<Node> nodes_;
  bool frozen_weights_ = false;
  bool frozen_arch_ = false;
  bool consumed_ = false;
};

}  // namespace degas
