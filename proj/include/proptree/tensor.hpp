// Dense 64-bit tensors, a single-use reverse-mode tape, and Adam.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace proptree {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when operand shapes do not conform; the message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::size_t>;
using Rng = std::mt19937_64;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Row-major tensor of doubles. Rank is arbitrary for storage; arithmetic on
/// the tape views every tensor as a matrix whose rows are the first dimension.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor matrix(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
  static Tensor uniform(Shape shape, double bound, Rng& rng, bool requires_grad = true);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.empty() ? 0 : values_.size() / shape_[0]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on);
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records primitive operations in topological order. One forward build, one
/// backward pass; a second backward() throws.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter. Backward accumulates into param.grad() when
  /// the parameter requires gradients. Repeated calls reuse the same leaf.
  Var parameter(Tensor& param);

  /// Accumulates d(loss)/d(param) into every reachable parameter's grad.
  void backward(Var loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

  // Used by primitive implementations.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Gradient buffer of node `id`, allocated on first use.
  std::span<double> grad(std::size_t id);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> param_ids_;
  bool consumed_ = false;
};

// Primitives. Every result is recorded on the tape of its first operand.
Var matmul(Var a, Var b);
Var matmul_bt(Var a, Var b);  // a · bᵀ
Var transpose(Var a);
/// Elementwise sum. `b` may also be a 1×c row or r×1 column, broadcast over `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var exp(Var a);
/// Softmax along `axis` (0: down each column, 1: across each row).
Var softmax(Var a, int axis);
Var log_softmax_rows(Var a);
Var sum(Var a);
Var sum(Var a, int axis);
Var concat(std::span<const Var> parts, int axis);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var reshape(Var a, std::size_t rows, std::size_t cols);
/// Multiplies by a constant mask (dropout masks already carry the 1/(1-rate) scale).
Var apply_mask(Var a, const Tensor& mask);
/// Gathers entries a[r][c] into a k×1 column.
Var pick(Var a, std::span<const std::pair<std::size_t, std::size_t>> entries);

/// Pairwise sum: row p*m+q of the (n·m)×c result is a[p] + b[q].
Var pair_add(Var a, Var b);
/// Pairwise bilinear form with a third-order weight stored as D×(k·D):
/// out[p*n+q][r] = Σ_{x,y} h[p][x] · w[x][r*D+y] · h[q][y].
Var pair_bilinear(Var h, Var w, std::size_t k);
/// Reduces a pairwise (n·n)×c block. over_second: out[p] = Σ_q e[p*n+q];
/// otherwise out[q] = Σ_p e[p*n+q].
Var pair_sum(Var e, std::size_t n, bool over_second);
/// Row-block inner products: out[r][g] = Σ_t x[r][g*w+t] · v[g][t] for a G×w matrix v.
Var block_dot(Var x, Var v);

/// Inverted-dropout mask: zero with probability `rate`, else 1/(1-rate).
/// Rows listed in keep_rows stay at 1.
Tensor dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng,
                    std::span<const std::size_t> keep_rows = {});

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  explicit AdamState(AdamConfig cfg = {}) : config(cfg) {}
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::vector<Shape> shapes;
  std::uint64_t step = 0;
};

/// One Adam update using each parameter's accumulated grad. The state binds to
/// the parameter shapes on its first step; later shape drift is rejected.
void adam_step(std::span<Tensor* const> params, AdamState& state);

}  // namespace proptree
