#include "degas/op_params.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "degas/error.hpp"

namespace degas {

namespace {

Parameter he_normal(Shape shape, double fan_in, std::mt19937_64& rng) {
  return Parameter{Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / fan_in)), ParamGroup::weights};
}

Parameter zeros_param(Shape shape) { return Parameter{Tensor::zeros(std::move(shape)), ParamGroup::weights}; }

[[noreturn]] void bad_shape(OpKind kind, const std::string& what) {
  throw ShapeError(std::string(to_string(kind)) + ": " + what);
}

std::size_t conv_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p, std::size_t d, OpKind kind,
                        const char* axis) {
  const std::size_t span = d * (k - 1) + 1;
  if (in + 2 * p < span) {
    bad_shape(kind, std::string("input ") + axis + " = " + std::to_string(in) + " smaller than kernel extent " +
                        std::to_string(span));
  }
  return (in + 2 * p - span) / s + 1;
}

}  // namespace

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::conv2d: return "conv2d";
    case OpKind::sep_conv2d: return "sep_conv2d";
    case OpKind::dil_conv2d: return "dil_conv2d";
    case OpKind::deconv2d: return "deconv2d";
    case OpKind::nn_upsample2d: return "nn_upsample2d";
    case OpKind::max_pool2d: return "max_pool2d";
    case OpKind::avg_pool2d: return "avg_pool2d";
    case OpKind::batch_norm2d: return "batch_norm2d";
    case OpKind::relu: return "relu";
    case OpKind::tanh: return "tanh";
    case OpKind::linear: return "linear";
    case OpKind::reshape: return "reshape";
    case OpKind::add: return "add";
    case OpKind::scale: return "scale";
    case OpKind::softmax: return "softmax";
  }
  return "unknown";
}

OpParams OpParams::conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t pad,
                          std::mt19937_64& rng, std::size_t dilation) {
  OpParams op;
  op.kind = OpKind::conv2d;
  op.kernel = k;
  op.stride = stride;
  op.padding = pad;
  op.dilation = dilation;
  op.in_channels = in;
  op.out_channels = out;
  op.weights.push_back(he_normal({out, in, k, k}, static_cast<double>(in * k * k), rng));
  op.weights.push_back(zeros_param({out}));
  return op;
}

OpParams OpParams::sep_conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t pad,
                              std::mt19937_64& rng) {
  OpParams op;
  op.kind = OpKind::sep_conv2d;
  op.kernel = k;
  op.padding = pad;
  op.in_channels = in;
  op.out_channels = out;
  op.weights.push_back(he_normal({in, 1, k, k}, static_cast<double>(k * k), rng));
  op.weights.push_back(he_normal({out, in, 1, 1}, static_cast<double>(in), rng));
  op.weights.push_back(zeros_param({out}));
  return op;
}

OpParams OpParams::dil_conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t pad, std::size_t dilation,
                              std::mt19937_64& rng) {
  OpParams op = sep_conv2d(in, out, k, pad, rng);
  op.kind = OpKind::dil_conv2d;
  op.dilation = dilation;
  return op;
}

OpParams OpParams::deconv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t pad,
                            std::mt19937_64& rng) {
  OpParams op;
  op.kind = OpKind::deconv2d;
  op.kernel = k;
  op.stride = stride;
  op.padding = pad;
  op.in_channels = in;
  op.out_channels = out;
  // Each output pixel receives about in * k² / stride² contributions.
  const double fan_in = std::max(1.0, static_cast<double>(in * k * k) / static_cast<double>(stride * stride));
  op.weights.push_back(he_normal({in, out, k, k}, fan_in, rng));
  op.weights.push_back(zeros_param({out}));
  return op;
}

OpParams OpParams::nn_upsample2d(std::size_t factor) {
  OpParams op;
  op.kind = OpKind::nn_upsample2d;
  op.scale_factor = factor;
  return op;
}

OpParams OpParams::max_pool2d(std::size_t k, std::size_t stride, std::size_t pad) {
  OpParams op;
  op.kind = OpKind::max_pool2d;
  op.kernel = k;
  op.stride = stride;
  op.padding = pad;
  return op;
}

OpParams OpParams::avg_pool2d(std::size_t k, std::size_t stride, std::size_t pad) {
  OpParams op = max_pool2d(k, stride, pad);
  op.kind = OpKind::avg_pool2d;
  return op;
}

OpParams OpParams::batch_norm2d(std::size_t channels) {
  OpParams op;
  op.kind = OpKind::batch_norm2d;
  op.in_channels = op.out_channels = channels;
  op.weights.push_back(Parameter{Tensor::ones({channels}), ParamGroup::weights});
  op.weights.push_back(zeros_param({channels}));
  op.buffers.running_mean = Tensor::zeros({channels});
  op.buffers.running_var = Tensor::ones({channels});
  return op;
}

OpParams OpParams::relu() {
  OpParams op;
  op.kind = OpKind::relu;
  return op;
}

OpParams OpParams::tanh() {
  OpParams op;
  op.kind = OpKind::tanh;
  return op;
}

OpParams OpParams::linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  OpParams op;
  op.kind = OpKind::linear;
  op.in_channels = in;
  op.out_channels = out;
  op.weights.push_back(he_normal({out, in}, static_cast<double>(in), rng));
  op.weights.push_back(zeros_param({out}));
  return op;
}

OpParams OpParams::reshape(Shape per_sample) {
  OpParams op;
  op.kind = OpKind::reshape;
  op.target_shape = std::move(per_sample);
  return op;
}

OpParams OpParams::add() {
  OpParams op;
  op.kind = OpKind::add;
  return op;
}

OpParams OpParams::scale() {
  OpParams op;
  op.kind = OpKind::scale;
  return op;
}

OpParams OpParams::softmax() {
  OpParams op;
  op.kind = OpKind::softmax;
  return op;
}

std::size_t OpParams::input_count() const {
  return (kind == OpKind::add || kind == OpKind::scale) ? 2 : 1;
}

Shape OpParams::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != input_count()) {
    bad_shape(kind, "expected " + std::to_string(input_count()) + " inputs, got " + std::to_string(inputs.size()));
  }
  const Shape& x = inputs[0];
  auto need_rank = [&](std::size_t r) {
    if (x.size() != r) bad_shape(kind, "input rank " + std::to_string(x.size()) + ", expected " + std::to_string(r));
  };
  auto need_channels = [&](std::size_t c) {
    if (x[1] != c) {
      bad_shape(kind, "input dim 1 (channels) is " + std::to_string(x[1]) + ", expected " + std::to_string(c));
    }
  };
  switch (kind) {
    case OpKind::conv2d:
    case OpKind::sep_conv2d:
    case OpKind::dil_conv2d: {
      need_rank(4);
      need_channels(in_channels);
      const std::size_t s = kind == OpKind::conv2d ? stride : 1;
      return {x[0], out_channels, conv_extent(x[2], kernel, s, padding, dilation, kind, "dim 2 (height)"),
              conv_extent(x[3], kernel, s, padding, dilation, kind, "dim 3 (width)")};
    }
    case OpKind::deconv2d:
      need_rank(4);
      need_channels(in_channels);
      if ((x[2] - 1) * stride + kernel <= 2 * padding) bad_shape(kind, "padding leaves empty output");
      return {x[0], out_channels, (x[2] - 1) * stride - 2 * padding + kernel,
              (x[3] - 1) * stride - 2 * padding + kernel};
    case OpKind::nn_upsample2d:
      need_rank(4);
      return {x[0], x[1], x[2] * scale_factor, x[3] * scale_factor};
    case OpKind::max_pool2d:
    case OpKind::avg_pool2d:
      need_rank(4);
      return {x[0], x[1], conv_extent(x[2], kernel, stride, padding, 1, kind, "dim 2 (height)"),
              conv_extent(x[3], kernel, stride, padding, 1, kind, "dim 3 (width)")};
    case OpKind::batch_norm2d:
      need_rank(4);
      need_channels(in_channels);
      return x;
    case OpKind::relu:
    case OpKind::tanh:
    case OpKind::softmax:
      return x;
    case OpKind::linear:
      need_rank(2);
      if (x[1] != in_channels) {
        bad_shape(kind, "input dim 1 (features) is " + std::to_string(x[1]) + ", expected " +
                            std::to_string(in_channels));
      }
      return {x[0], out_channels};
    case OpKind::reshape: {
      if (x.empty()) bad_shape(kind, "input has no batch axis");
      Shape out{x[0]};
      out.insert(out.end(), target_shape.begin(), target_shape.end());
      if (shape_numel(out) != shape_numel(x)) {
        bad_shape(kind, "cannot view " + shape_to_string(x) + " as " + shape_to_string(out));
      }
      return out;
    }
    case OpKind::add:
      if (inputs[1] != x) bad_shape(kind, "operands " + shape_to_string(x) + " and " + shape_to_string(inputs[1]));
      return x;
    case OpKind::scale:
      if (shape_numel(inputs[1]) != 1) bad_shape(kind, "factor must have one element");
      return x;
  }
  return x;
}

std::vector<Parameter*> OpParams::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : weights) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> OpParams::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : weights) out.push_back(&p);
  return out;
}

Var forward(OpParams& op, std::span<const Var> inputs, Tape& tape) {
  std::vector<Var> bound;
  bound.reserve(op.weights.size());
  for (const auto& p : op.weights) bound.push_back(tape.parameter(p));
  return forward_with(op, inputs, bound);
}

Var forward_with(OpParams& op, std::span<const Var> inputs, std::span<const Var> w) {
  std::vector<Shape> shapes;
  for (const Var& v : inputs) shapes.push_back(v.shape());
  const Shape out_shape = op.output_shape(shapes);
  const Var& x = inputs[0];
  switch (op.kind) {
    case OpKind::conv2d:
      return ops::conv2d(x, w[0], w[1], {op.stride, op.padding, op.dilation, 1});
    case OpKind::sep_conv2d:
    case OpKind::dil_conv2d: {
      Var depth = ops::conv2d(x, w[0], std::nullopt, {1, op.padding, op.dilation, op.in_channels});
      return ops::conv2d(depth, w[1], w[2], {});
    }
    case OpKind::deconv2d:
      return ops::deconv2d(x, w[0], w[1], op.stride, op.padding);
    case OpKind::nn_upsample2d:
      return ops::upsample_nearest(x, op.scale_factor);
    case OpKind::max_pool2d:
      return ops::max_pool2d(x, op.kernel, op.stride, op.padding);
    case OpKind::avg_pool2d:
      return ops::avg_pool2d(x, op.kernel, op.stride, op.padding);
    case OpKind::batch_norm2d:
      return ops::batch_norm2d(x, w[0], w[1], op.buffers, {op.training, 1e-5, 0.1});
    case OpKind::relu:
      return ops::relu(x);
    case OpKind::tanh:
      return ops::tanh(x);
    case OpKind::linear:
      return ops::linear(x, w[0], w[1]);
    case OpKind::reshape:
      return ops::reshape(x, out_shape);
    case OpKind::add:
      return ops::add(x, inputs[1]);
    case OpKind::scale:
      return ops::scale(x, inputs[1]);
    case OpKind::softmax:
      return ops::softmax(x);
  }
  throw Error("unhandled op kind");
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

// L = Σ r ⊙ y for a fixed r.
Var project(Var y, const Tensor& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) acc += r[i] * y.value()[i];
  return y.tape().record(Tensor::scalar(acc), {y}, [r](BackwardContext& ctx) {
    Tensor& g = *ctx.input_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad[0] * r[i];
  });
}

}  // namespace

GradCheckReport check_gradients(std::string name, std::vector<CheckTarget> targets, const CheckedFunction& f,
                                double tolerance, std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Tensor projection;

  auto evaluate = [&](bool with_grad, std::vector<Tensor>* grads) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : targets) vars.push_back(with_grad ? tape.leaf(t.value) : tape.constant(t.value));
    Var y = f(tape, vars);
    if (projection.empty()) projection = Tensor::randn(y.shape(), rng);
    Var loss = project(y, projection);
    const double value = loss.value()[0];
    if (with_grad) {
      GradientMap g = tape.backward(loss);
      for (const Var& v : vars) grads->push_back(g.at(v));
    }
    return value;
  };

  std::vector<Tensor> analytic;
  evaluate(true, &analytic);

  GradCheckReport report;
  report.name = std::move(name);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    GradCheckGroup group{targets[t].name, 0.0, true};
    Tensor& value = targets[t].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = evaluate(false, nullptr);
      value[i] = saved - h;
      const double down = evaluate(false, nullptr);
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      group.max_rel_error = std::max(group.max_rel_error, relative_error(analytic[t][i], numeric));
    }
    group.pass = group.max_rel_error <= tolerance;
    report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
    report.pass = report.pass && group.pass;
    report.groups.push_back(std::move(group));
  }
  return report;
}

namespace {

std::vector<std::string> weight_names(OpKind kind) {
  switch (kind) {
    case OpKind::conv2d:
    case OpKind::deconv2d:
    case OpKind::linear: return {"weight", "bias"};
    case OpKind::sep_conv2d:
    case OpKind::dil_conv2d: return {"depthwise", "pointwise", "bias"};
    case OpKind::batch_norm2d: return {"gamma", "beta"};
    default: return {};
  }
}

Tensor draw_input(OpKind kind, const Shape& shape, std::mt19937_64& rng) {
  Tensor t(shape);
  if (kind == OpKind::relu) {
    std::uniform_real_distribution<double> mag(0.05, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : t.data()) v = sign(rng) ? mag(rng) : -mag(rng);
  } else if (kind == OpKind::max_pool2d) {
    // Distinct, well-separated values so no window has a near-tie.
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const double step = 2.0 / static_cast<double>(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = -1.0 + step * static_cast<double>(order[i]);
  } else {
    t = Tensor::randn(shape, rng);
  }
  return t;
}

}  // namespace

GradCheckReport grad_check(const OpParams& op, std::span<const Shape> input_shapes, double tolerance,
                           std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  std::vector<CheckTarget> targets;
  for (std::size_t i = 0; i < input_shapes.size(); ++i) {
    targets.push_back({"input" + std::to_string(i), draw_input(op.kind, input_shapes[i], rng)});
  }
  const auto names = weight_names(op.kind);
  for (std::size_t i = 0; i < op.weights.size(); ++i) {
    Tensor w = op.weights[i].value;
    // Perturb away from the init so biases and bn affine terms are exercised.
    for (auto& v : w.data()) v += std::normal_distribution<double>(0.0, 0.1)(rng);
    targets.push_back({i < names.size() ? names[i] : "weight" + std::to_string(i), std::move(w)});
  }
  const std::size_t n_inputs = input_shapes.size();
  CheckedFunction f = [op, n_inputs](Tape&, std::span<const Var> vars) {
    OpParams local = op;
    return forward_with(local, vars.subspan(0, n_inputs), vars.subspan(n_inputs));
  };
  return check_gradients(std::string(to_string(op.kind)), std::move(targets), f, tolerance, seed, h);
}

}  // namespace degas
