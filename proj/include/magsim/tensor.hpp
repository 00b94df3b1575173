#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace magsim {

class CsrMatrix;

/// Dense row-major matrix of doubles. Plain value type; carries no autodiff state.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  std::string shape_string() const;

  bool operator==(const Matrix&) const = default;
};

/// Trainable weight with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool has_grad = false;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

  void zero_grad();
};

class Tape;

/// A matrix value, optionally attached to a gradient tape.
///
/// Copies share the underlying value buffer. A tensor with no tape is a
/// constant: ops over constants only produce constants and record nothing.
class Tensor {
 public:
  Tensor() : value_(std::make_shared<const Matrix>()) {}
  explicit Tensor(Matrix value) : value_(std::make_shared<const Matrix>(std::move(value))) {}

  std::size_t rows() const { return value_->rows; }
  std::size_t cols() const { return value_->cols; }
  const Matrix& value() const { return *value_; }
  double operator()(std::size_t r, std::size_t c) const { return (*value_)(r, c); }
  double item() const;

  Tape* tape() const { return tape_; }
  bool on_tape() const { return tape_ != nullptr; }
  std::size_t node() const { return node_; }

 private:
  friend class Tape;
  friend Tensor detach(const Tensor& t);
  std::shared_ptr<const Matrix> value_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

/// Tensor detached from any tape, sharing the value buffer.
Tensor detach(const Tensor& t);

/// Reverse-mode tape. Nodes are appended in evaluation order and replayed
/// in reverse by backward(). Not copyable; tensors keep a pointer to it.
class Tape {
 public:
  using BackwardRule = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is read back with grad().
  Tensor variable(Matrix value);
  /// Leaf bound to a parameter; backward() adds into p.grad.
  Tensor parameter(Parameter& p);
  /// Appends an op node. Used by the op implementations.
  Tensor record(Matrix value, BackwardRule rule);

  void backward(const Tensor& scalar_loss);
  /// Gradient of the last backward() w.r.t. t; zeros if t was unreachable.
  Matrix grad(const Tensor& t) const;

  void accumulate(const Tensor& t, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  void clear();

 private:
  struct Node {
    std::shared_ptr<const Matrix> value;
    Matrix grad;
    BackwardRule rule;
    Parameter* sink = nullptr;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Differentiable ops. Each throws DimensionError on incompatible shapes.

Tensor matmul(const Tensor& a, const Tensor& b);
/// Row-normalized sparse adjacency times dense features (neighbor mean).
Tensor spmm(const CsrMatrix& adj, const Tensor& h);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// a (n x k) plus a 1 x k row vector broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor row_select(const Tensor& a, std::span<const std::size_t> rows);
/// Inverted dropout. Identity when !training or rate == 0.
Tensor dropout(const Tensor& a, double rate, bool training, std::mt19937_64& rng);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Mean over rows of the label-smoothed negative log-likelihood. Target puts
/// 1 - s on the true class and s / (C - 1) on every other class.
Tensor cross_entropy_smoothed(const Tensor& logits, std::span<const std::size_t> labels, double smoothing);

// Plain (tape-free) helpers.

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix softmax_rows(const Matrix& logits);
std::vector<std::size_t> argmax_rows(const Matrix& m);
double l2_norm(std::span<const double> v);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;
};

/// One Adam update with bias correction. Weight decay is added to the
/// gradient (g + wd * theta) before the moment updates.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& opt);

}  // namespace magsim
