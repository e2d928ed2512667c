#include "proptree/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "proptree/kernels.hpp"

namespace proptree {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, std::vector<double>(shape_size(shape), 0.0), requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto dim : shape_) {
    if (dim == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  if (shape_size(shape_) != values_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not hold " +
                     std::to_string(values_.size()) + " values");
  }
  set_requires_grad(requires_grad);
}

Tensor Tensor::uniform(Shape shape, double bound, Rng& rng, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values_) v = dist(rng);
  return t;
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on) {
    grad_.assign(values_.size(), 0.0);
  } else {
    grad_.clear();
  }
}

std::span<double> Tensor::grad() {
  if (!requires_grad_) throw Error("tensor " + shape_string(shape_) + " does not require grad");
  return grad_;
}

std::span<const double> Tensor::grad() const {
  if (!requires_grad_) throw Error("tensor " + shape_string(shape_) + " does not require grad");
  return grad_;
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

const Tensor& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw ShapeError("expected a scalar, got " + shape_string(v.shape()));
  return v[0];
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor& param) {
  if (auto it = param_ids_.find(&param); it != param_ids_.end()) return Var(this, it->second);
  Node node;
  node.value = param;  // copy of values; gradients flow back through `param`
  node.value.set_requires_grad(false);
  node.param = &param;
  node.needs_grad = param.requires_grad();
  nodes_.push_back(std::move(node));
  param_ids_.emplace(&param, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](std::size_t id) { return nodes_[id].needs_grad; });
  if (node.needs_grad) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw Error("loss was not recorded on this tape");
  if (consumed_) throw Error("tape already consumed by a previous backward pass");
  if (value(loss.id_).size() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_string(value(loss.id_).shape()));
  }
  consumed_ = true;
  grad(loss.id_)[0] = 1.0;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.param != nullptr) {
      auto target = node.param->grad();
      for (std::size_t i = 0; i < target.size(); ++i) target[i] += node.grad[i];
    } else if (node.backward) {
      node.backward(*this, node.grad);
    }
  }
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw Error("operands recorded on different tapes");
  return a.tape();
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                   shape_string(b.shape()));
}

Shape mat(std::size_t rows, std::size_t cols) { return {rows, cols}; }

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) mismatch("matmul", av, bv);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out(mat(m, n));
  kernels::gemm({av.values(), bv.values(), out.values(), m, k, n});
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [=](Tape& tp, std::span<const double> g) {
    if (tp.needs_grad(ia)) {
      kernels::gemm({g, tp.value(ib).values(), tp.grad(ia), m, n, k, false, true, true});
    }
    if (tp.needs_grad(ib)) {
      kernels::gemm({tp.value(ia).values(), g, tp.grad(ib), k, m, n, true, false, true});
    }
  });
}

Var matmul_bt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) mismatch("matmul_bt", av, bv);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor out(mat(m, n));
  kernels::gemm({av.values(), bv.values(), out.values(), m, k, n, false, true});
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [=](Tape& tp, std::span<const double> g) {
    if (tp.needs_grad(ia)) {
      kernels::gemm({g, tp.value(ib).values(), tp.grad(ia), m, n, k, false, false, true});
    }
    if (tp.needs_grad(ib)) {
      kernels::gemm({g, tp.value(ia).values(), tp.grad(ib), n, m, k, true, false, true});
    }
  });
}

Var transpose(Var a) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(mat(c, r));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [=](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

namespace {

Var add_signed(Var a, Var b, double sign, const char* name) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t r = av.rows(), c = av.cols();
  enum class Mode { Same, Row, Col } mode;
  if (bv.rows() == r && bv.cols() == c) {
    mode = Mode::Same;
  } else if (bv.rows() == 1 && bv.cols() == c) {
    mode = Mode::Row;
  } else if (bv.rows() == r && bv.cols() == 1) {
    mode = Mode::Col;
  } else {
    mismatch(name, av, bv);
  }
  Tensor out(mat(r, c));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double bx = mode == Mode::Same ? bv[i * c + j] : mode == Mode::Row ? bv[j] : bv[i];
      out[i * c + j] = av[i * c + j] + sign * bx;
    }
  }
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [=](Tape& tp, std::span<const double> g) {
    if (tp.needs_grad(ia)) {
      auto ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(ib)) {
      auto gb = tp.grad(ib);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          const std::size_t dst = mode == Mode::Same ? i * c + j : mode == Mode::Row ? j : i;
          gb[dst] += sign * g[i * c + j];
        }
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return add_signed(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_signed(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape() && !(av.rows() == bv.rows() && av.cols() == bv.cols())) {
    mismatch("mul", av, bv);
  }
  Tensor out(mat(av.rows(), av.cols()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [=](Tape& tp, std::span<const double> g) {
    if (tp.needs_grad(ia)) {
      auto ga = tp.grad(ia);
      const Tensor& y = tp.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (tp.needs_grad(ib)) {
      auto gb = tp.grad(ib);
      const Tensor& x = tp.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  Tensor out(mat(av.rows(), av.cols()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [=](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

namespace {

// Elementwise map whose derivative is expressed through the output y.
template <typename F, typename D>
Var map_by_output(Var a, F f, D dy) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  Tensor out(mat(av.rows(), av.cols()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const auto ia = a.id();
  auto result = std::make_shared<std::size_t>(0);
  Var v = t.record(std::move(out), {ia}, [ia, dy, result](Tape& tp, std::span<const double> g) {
    const Tensor& y = tp.value(*result);
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dy(y[i]);
  });
  *result = v.id();
  return v;
}

}  // namespace

Var tanh(Var a) {
  return map_by_output(a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return map_by_output(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return map_by_output(a, [](double x) { return std::exp(x); }, [](double y) { return y; });
}

Var log(Var a) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  Tensor out(mat(av.rows(), av.cols()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::log(av[i]);
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& tp, std::span<const double> g) {
    const Tensor& x = tp.value(ia);
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
  });
}

Var softmax(Var a, int axis) {
  if (axis != 0 && axis != 1) throw Error("softmax: axis must be 0 or 1");
  Tape& t = a.tape();
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  // Iterate over "lanes": rows for axis 1, columns for axis 0.
  const std::size_t lanes = axis == 1 ? r : c;
  const std::size_t len = axis == 1 ? c : r;
  const std::size_t lane_stride = axis == 1 ? c : 1;
  const std::size_t elem_stride = axis == 1 ? 1 : c;
  Tensor out(mat(r, c));
  for (std::size_t l = 0; l < lanes; ++l) {
    const std::size_t base = l * lane_stride;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < len; ++e) mx = std::max(mx, av[base + e * elem_stride]);
    double z = 0.0;
    for (std::size_t e = 0; e < len; ++e) {
      const double v = std::exp(av[base + e * elem_stride] - mx);
      out[base + e * elem_stride] = v;
      z += v;
    }
    for (std::size_t e = 0; e < len; ++e) out[base + e * elem_stride] /= z;
  }
  const auto ia = a.id();
  auto self = std::make_shared<std::size_t>(0);
  Var v = t.record(std::move(out), {ia}, [=](Tape& tp, std::span<const double> g) {
    const Tensor& y = tp.value(*self);
    auto ga = tp.grad(ia);
    for (std::size_t l = 0; l < lanes; ++l) {
      const std::size_t base = l * lane_stride;
      double dot = 0.0;
      for (std::size_t e = 0; e < len; ++e) {
        const std::size_t k = base + e * elem_stride;
        dot += g[k] * y[k];
      }
      for (std::size_t e = 0; e < len; ++e) {
        const std::size_t k = base + e * elem_stride;
        ga[k] += y[k] * (g[k] - dot);
      }
    }
  });
  *self = v.id();
  return v;
}

Var log_softmax_rows(Var a) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(mat(r, c));
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = av.values().data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
  }
  const auto ia = a.id();
  auto self = std::make_shared<std::size_t>(0);
  Var v = t.record(std::move(out), {ia}, [=](Tape& tp, std::span<const double> g) {
    const Tensor& y = tp.value(*self);
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < r; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < c; ++j) gsum += g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) {
        ga[i * c + j] += g[i * c + j] - std::exp(y[i * c + j]) * gsum;
      }
    }
  });
  *self = v.id();
  return v;
}

Var sum(Var a) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  double s = 0.0;
  for (double x : av.values()) s += x;
  const auto ia = a.id();
  return t.record(Tensor(mat(1, 1), std::vector<double>{s}), {ia}, [ia](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(ia);
    for (auto& x : ga) x += g[0];
  });
}

Var sum(Var a, int axis) {
  if (axis != 0 && axis != 1) throw Error("sum: axis must be 0 or 1");
  Tape& t = a.tape();
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(axis == 0 ? mat(1, c) : mat(r, 1));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += av[i * c + j];
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [=](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[axis == 0 ? j : i];
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw Error("concat: no operands");
  if (axis != 0 && axis != 1) throw Error("concat: axis must be 0 or 1");
  Tape& t = parts[0].tape();
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (&p.tape() != &t) throw Error("operands recorded on different tapes");
    const Tensor& v = p.value();
    if (axis == 0) {
      if (cols == 0) cols = v.cols();
      if (v.cols() != cols) mismatch("concat", parts[0].value(), v);
      offsets.push_back(rows);
      rows += v.rows();
    } else {
      if (rows == 0) rows = v.rows();
      if (v.rows() != rows) mismatch("concat", parts[0].value(), v);
      offsets.push_back(cols);
      cols += v.cols();
    }
    ids.push_back(p.id());
  }
  Tensor out(mat(rows, cols));
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t i = 0; i < v.rows(); ++i) {
      for (std::size_t j = 0; j < v.cols(); ++j) {
        const std::size_t dst = axis == 0 ? (offsets[p] + i) * cols + j : i * cols + offsets[p] + j;
        out[dst] = v[i * v.cols() + j];
      }
    }
  }
  return t.record(std::move(out), ids, [=](Tape& tp, std::span<const double> g) {
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (!tp.needs_grad(ids[p])) continue;
      const Tensor& v = tp.value(ids[p]);
      const std::size_t vr = v.rows(), vc = v.cols();
      auto gp = tp.grad(ids[p]);
      for (std::size_t i = 0; i < vr; ++i) {
        for (std::size_t j = 0; j < vc; ++j) {
          const std::size_t src =
              axis == 0 ? (offsets[p] + i) * cols + j : i * cols + offsets[p] + j;
          gp[i * vc + j] += g[src];
        }
      }
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  if (begin >= end || end > av.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + shape_string(av.shape()));
  }
  const std::size_t c = av.cols();
  Tensor out(mat(end - begin, c));
  std::copy(av.values().begin() + static_cast<std::ptrdiff_t>(begin * c),
            av.values().begin() + static_cast<std::ptrdiff_t>(end * c), out.values().begin());
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [=](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * c + i] += g[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  if (begin >= end || end > av.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + shape_string(av.shape()));
  }
  const std::size_t r = av.rows(), c = av.cols(), w = end - begin;
  Tensor out(mat(r, w));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * c + begin + j];
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [=](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * c + begin + j] += g[i * w + j];
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  if (rows * cols != av.size()) {
    throw ShapeError("reshape: " + shape_string(av.shape()) + " vs " + shape_string(mat(rows, cols)));
  }
  Tensor out(mat(rows, cols), std::vector<double>(av.values().begin(), av.values().end()));
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var apply_mask(Var a, const Tensor& mask) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  if (mask.size() != av.size()) mismatch("apply_mask", av, mask);
  Tensor out(mat(av.rows(), av.cols()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * mask[i];
  const auto ia = a.id();
  auto m = std::make_shared<std::vector<double>>(mask.values().begin(), mask.values().end());
  return t.record(std::move(out), {ia}, [ia, m](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*m)[i];
  });
}

Var pick(Var a, std::span<const std::pair<std::size_t, std::size_t>> entries) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  if (entries.empty()) throw Error("pick: no entries");
  const std::size_t c = av.cols();
  std::vector<std::size_t> flat;
  flat.reserve(entries.size());
  for (auto [r, col] : entries) {
    if (r >= av.rows() || col >= c) {
      throw ShapeError("pick: entry (" + std::to_string(r) + "," + std::to_string(col) +
                       ") out of range for " + shape_string(av.shape()));
    }
    flat.push_back(r * c + col);
  }
  Tensor out(mat(flat.size(), 1));
  for (std::size_t i = 0; i < flat.size(); ++i) out[i] = av[flat[i]];
  const auto ia = a.id();
  return t.record(std::move(out), {ia}, [ia, flat](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < flat.size(); ++i) ga[flat[i]] += g[i];
  });
}

Var pair_add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) mismatch("pair_add", av, bv);
  const std::size_t n = av.rows(), m = bv.rows(), c = av.cols();
  Tensor out(mat(n * m, c));
  kernels::pair_add(av.values(), bv.values(), out.values(), n, m, c);
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [=](Tape& tp, std::span<const double> g) {
    const bool need_a = tp.needs_grad(ia), need_b = tp.needs_grad(ib);
    std::span<double> ga, gb;
    if (need_a) ga = tp.grad(ia);
    if (need_b) gb = tp.grad(ib);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = 0; q < m; ++q) {
        const double* gr = g.data() + (p * m + q) * c;
        if (need_a)
          for (std::size_t r = 0; r < c; ++r) ga[p * c + r] += gr[r];
        if (need_b)
          for (std::size_t r = 0; r < c; ++r) gb[q * c + r] += gr[r];
      }
    }
  });
}

Var pair_bilinear(Var h, Var w, std::size_t k) {
  Tape& t = same_tape(h, w);
  const Tensor& hv = h.value();
  const Tensor& wv = w.value();
  const std::size_t n = hv.rows(), d = hv.cols();
  if (wv.rows() != d || wv.cols() != k * d) mismatch("pair_bilinear", hv, wv);
  auto proj = std::make_shared<std::vector<double>>(n * k * d);
  kernels::gemm({hv.values(), wv.values(), *proj, n, d, k * d});
  Tensor out(mat(n * n, k));
  kernels::pair_contract(*proj, hv.values(), out.values(), n, d, k);
  const auto ih = h.id(), iw = w.id();
  return t.record(std::move(out), {ih, iw}, [=](Tape& tp, std::span<const double> g) {
    const Tensor& hval = tp.value(ih);
    std::vector<double> dproj(n * k * d, 0.0);
    const bool need_h = tp.needs_grad(ih);
    std::span<double> gh;
    if (need_h) gh = tp.grad(ih);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = 0; q < n; ++q) {
        const double* gpq = g.data() + (p * n + q) * k;
        for (std::size_t r = 0; r < k; ++r) {
          const double gv = gpq[r];
          if (gv == 0.0) continue;
          double* dp = dproj.data() + p * k * d + r * d;
          const double* pp = proj->data() + p * k * d + r * d;
          for (std::size_t y = 0; y < d; ++y) {
            dp[y] += gv * hval[q * d + y];
            if (need_h) gh[q * d + y] += gv * pp[y];
          }
        }
      }
    }
    if (need_h) {
      kernels::gemm({dproj, tp.value(iw).values(), gh, n, k * d, d, false, true, true});
    }
    if (tp.needs_grad(iw)) {
      kernels::gemm({hval.values(), dproj, tp.grad(iw), d, n, k * d, true, false, true});
    }
  });
}

Var pair_sum(Var e, std::size_t n, bool over_second) {
  Tape& t = e.tape();
  const Tensor& ev = e.value();
  if (ev.rows() != n * n) {
    throw ShapeError("pair_sum: " + shape_string(ev.shape()) + " is not pairwise over " +
                     std::to_string(n) + " positions");
  }
  const std::size_t c = ev.cols();
  Tensor out(mat(n, c));
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      const std::size_t dst = over_second ? p : q;
      for (std::size_t r = 0; r < c; ++r) out[dst * c + r] += ev[(p * n + q) * c + r];
    }
  }
  const auto ie = e.id();
  return t.record(std::move(out), {ie}, [=](Tape& tp, std::span<const double> g) {
    auto ge = tp.grad(ie);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = 0; q < n; ++q) {
        const std::size_t src = over_second ? p : q;
        for (std::size_t r = 0; r < c; ++r) ge[(p * n + q) * c + r] += g[src * c + r];
      }
    }
  });
}

Var block_dot(Var x, Var v) {
  Tape& t = same_tape(x, v);
  const Tensor& xv = x.value();
  const Tensor& vv = v.value();
  const std::size_t groups = vv.rows(), width = vv.cols(), r = xv.rows();
  if (xv.cols() != groups * width) mismatch("block_dot", xv, vv);
  Tensor out(mat(r, groups));
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.values().data() + i * groups * width;
    for (std::size_t gi = 0; gi < groups; ++gi) {
      double acc = 0.0;
      for (std::size_t w = 0; w < width; ++w) acc += row[gi * width + w] * vv[gi * width + w];
      out[i * groups + gi] = acc;
    }
  }
  const auto ix = x.id(), iv = v.id();
  return t.record(std::move(out), {ix, iv}, [=](Tape& tp, std::span<const double> g) {
    const Tensor& xval = tp.value(ix);
    const Tensor& vval = tp.value(iv);
    const bool need_x = tp.needs_grad(ix), need_v = tp.needs_grad(iv);
    std::span<double> gx, gv;
    if (need_x) gx = tp.grad(ix);
    if (need_v) gv = tp.grad(iv);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t gi = 0; gi < groups; ++gi) {
        const double go = g[i * groups + gi];
        if (go == 0.0) continue;
        const std::size_t base = i * groups * width + gi * width;
        for (std::size_t w = 0; w < width; ++w) {
          if (need_x) gx[base + w] += go * vval[gi * width + w];
          if (need_v) gv[gi * width + w] += go * xval[base + w];
        }
      }
    }
  });
}

Tensor dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng,
                    std::span<const std::size_t> keep_rows) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout rate must lie in [0,1)");
  Tensor mask(mat(rows, cols));
  std::bernoulli_distribution drop(rate);
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask.values()) m = (rate > 0.0 && drop(rng)) ? 0.0 : keep;
  for (auto r : keep_rows) {
    for (std::size_t j = 0; j < cols; ++j) mask[r * cols + j] = 1.0;
  }
  return mask;
}

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (state.step == 0 && state.shapes.empty()) {
    for (auto* p : params) {
      state.shapes.push_back(p->shape());
      state.first_moment.emplace_back(p->size(), 0.0);
      state.second_moment.emplace_back(p->size(), 0.0);
    }
  }
  if (params.size() != state.shapes.size()) {
    throw ShapeError("adam_step: state holds " + std::to_string(state.shapes.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != state.shapes[i]) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " shape " +
                       shape_string(params[i]->shape()) + " vs moments " +
                       shape_string(state.shapes[i]));
    }
  }
  ++state.step;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    auto g = p.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

}  // namespace proptree
