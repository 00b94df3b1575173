#include "magsim/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "magsim/csr.hpp"
#include "magsim/errors.hpp"

namespace magsim {

namespace {

std::string shapes(const Matrix& a, const Matrix& b) { return a.shape_string() + " and " + b.shape_string(); }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shapes(a.value(), b.value()));
  }
}

Tape* common_tape(std::initializer_list<const Tensor*> operands) {
  Tape* tape = nullptr;
  for (const Tensor* t : operands) {
    if (!t->on_tape()) continue;
    if (tape != nullptr && tape != t->tape()) throw ContractError("operands recorded on different tapes");
    tape = t->tape();
  }
  return tape;
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// c[0..n) += a * b[0..n)
inline void axpy(double* __restrict c, double a, const double* __restrict b, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) t.data[j * a.rows + i] = a.data[i * a.cols + j];
  }
  return t;
}

// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b) { return matmul(a, transpose(b)); }

// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* br = b.data.data() + k * b.cols;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = a.data[k * a.cols + i];
      if (aki == 0.0) continue;
      axpy(c.data.data() + i * c.cols, aki, br, b.cols);
    }
  }
  return c;
}

}  // namespace

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw DimensionError("matrix data length does not match " + shape_string());
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m;
  m.rows = rows.size();
  m.cols = rows.size() == 0 ? 0 : rows.begin()->size();
  for (const auto& r : rows) {
    if (r.size() != m.cols) throw DimensionError("ragged row in matrix literal");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

void Parameter::zero_grad() {
  if (grad.rows != value.rows || grad.cols != value.cols) grad = Matrix(value.rows, value.cols);
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
  has_grad = false;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw DimensionError("item() on non-scalar " + value_->shape_string());
  return value_->data[0];
}

Tensor detach(const Tensor& t) {
  Tensor out;
  out.value_ = t.value_;
  return out;
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::variable(Matrix value) { return record(std::move(value), nullptr); }

Tensor Tape::parameter(Parameter& p) {
  Tensor t = record(p.value, nullptr);
  nodes_.back().sink = &p;
  return t;
}

Tensor Tape::record(Matrix value, BackwardRule rule) {
  if (consumed_) throw ContractError("tape already replayed; clear() before recording again");
  Tensor t;
  t.value_ = std::make_shared<const Matrix>(std::move(value));
  t.tape_ = this;
  t.node_ = nodes_.size();
  nodes_.push_back(Node{t.value_, Matrix{}, std::move(rule), nullptr});
  return t;
}

void Tape::accumulate(const Tensor& t, const Matrix& g) {
  if (t.tape() != this) return;
  Node& n = nodes_[t.node()];
  if (n.grad.empty()) {
    n.grad = g;
  } else {
    add_into(n.grad, g);
  }
}

void Tape::backward(const Tensor& scalar_loss) {
  if (scalar_loss.tape() != this) throw ContractError("backward: loss is not recorded on this tape");
  if (scalar_loss.rows() != 1 || scalar_loss.cols() != 1) {
    throw DimensionError("backward: loss must be 1x1, got " + scalar_loss.value().shape_string());
  }
  if (consumed_) throw ContractError("backward: tape already replayed");
  consumed_ = true;

  nodes_[scalar_loss.node()].grad = Matrix(1, 1, 1.0);
  for (std::size_t i = scalar_loss.node() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.rule) continue;
    n.rule(*this, n.grad);
  }
  for (Node& n : nodes_) {
    if (n.sink == nullptr) continue;
    Parameter& p = *n.sink;
    if (p.grad.rows != p.value.rows || p.grad.cols != p.value.cols) p.grad = Matrix(p.value.rows, p.value.cols);
    if (!n.grad.empty()) add_into(p.grad, n.grad);
    p.has_grad = true;
  }
}

Matrix Tape::grad(const Tensor& t) const {
  if (t.tape() != this) throw ContractError("grad: tensor is not recorded on this tape");
  const Node& n = nodes_[t.node()];
  if (n.grad.empty()) return Matrix(t.rows(), t.cols());
  return n.grad;
}

void Tape::clear() {
  nodes_.clear();
  consumed_ = false;
}

// ---------------------------------------------------------------------------
// Dense helpers

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw DimensionError("matmul: shape mismatch " + shapes(a, b));
  Matrix c(a.rows, b.cols);
  const std::size_t n = b.cols;
  std::size_t i = 0;
  // Four output rows at a time so each row of B is loaded once per block.
  for (; i + 4 <= a.rows; i += 4) {
    double* __restrict c0 = c.data.data() + i * n;
    double* __restrict c1 = c0 + n;
    double* __restrict c2 = c1 + n;
    double* __restrict c3 = c2 + n;
    const double* a0 = a.data.data() + i * a.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double x0 = a0[k], x1 = a0[a.cols + k], x2 = a0[2 * a.cols + k], x3 = a0[3 * a.cols + k];
      if (x0 == 0.0 && x1 == 0.0 && x2 == 0.0 && x3 == 0.0) continue;
      const double* __restrict br = b.data.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bj = br[j];
        c0[j] += x0 * bj;
        c1[j] += x1 * bj;
        c2[j] += x2 * bj;
        c3[j] += x3 * bj;
      }
    }
  }
  for (; i < a.rows; ++i) {
    double* cr = c.data.data() + i * n;
    const double* ar = a.data.data() + i * a.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      if (ar[k] == 0.0) continue;
      axpy(cr, ar[k], b.data.data() + k * n, n);
    }
  }
  return c;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    auto z = logits.row(i);
    auto out = p.row(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      out[c] = std::exp(z[c] - mx);
      denom += out[c];
    }
    for (double& v : out) v /= denom;
  }
  return p;
}

std::vector<std::size_t> argmax_rows(const Matrix& m) {
  std::vector<std::size_t> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto r = m.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: shape mismatch " + shapes(a.value(), b.value()));
  Matrix out = matmul(a.value(), b.value());
  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return Tensor(std::move(out));
  return tape->record(std::move(out), [a, b](Tape& t, const Matrix& g) {
    if (a.on_tape()) t.accumulate(a, matmul_nt(g, b.value()));
    if (b.on_tape()) t.accumulate(b, matmul_tn(a.value(), g));
  });
}

Tensor spmm(const CsrMatrix& adj, const Tensor& h) {
  if (adj.normalization() == Normalization::None) {
    throw ContractError("spmm: adjacency must be normalized (row-mean or symmetric)");
  }
  if (adj.num_cols() != h.rows()) {
    throw DimensionError("spmm: adjacency " + std::to_string(adj.num_rows()) + "x" + std::to_string(adj.num_cols()) +
                         " incompatible with features " + h.value().shape_string());
  }
  Matrix out = adj.multiply(h.value());
  Tape* tape = h.tape();
  if (tape == nullptr) return Tensor(std::move(out));
  // The adjacency is captured by pointer; it must outlive backward().
  const CsrMatrix* a = &adj;
  return tape->record(std::move(out), [a, h](Tape& t, const Matrix& g) { t.accumulate(h, a->multiply_transposed(g)); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Matrix out = a.value();
  add_into(out, b.value());
  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return Tensor(std::move(out));
  return tape->record(std::move(out), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.value().data[i];
  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return Tensor(std::move(out));
  return tape->record(std::move(out), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (b.on_tape()) {
      Matrix neg = g;
      for (double& v : neg.data) v = -v;
      t.accumulate(b, neg);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.value().data[i];
  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return Tensor(std::move(out));
  return tape->record(std::move(out), [a, b](Tape& t, const Matrix& g) {
    if (a.on_tape()) {
      Matrix ga = g;
      for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] *= b.value().data[i];
      t.accumulate(a, ga);
    }
    if (b.on_tape()) {
      Matrix gb = g;
      for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] *= a.value().data[i];
      t.accumulate(b, gb);
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " + row.value().shape_string());
  }
  Matrix out = a.value();
  const auto& r = row.value().data;
  for (std::size_t i = 0; i < out.rows; ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < out.cols; ++j) o[j] += r[j];
  }
  Tape* tape = common_tape({&a, &row});
  if (tape == nullptr) return Tensor(std::move(out));
  return tape->record(std::move(out), [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (row.on_tape()) {
      Matrix gr(1, g.cols);
      for (std::size_t i = 0; i < g.rows; ++i) {
        auto gi = g.row(i);
        for (std::size_t j = 0; j < g.cols; ++j) gr.data[j] += gi[j];
      }
      t.accumulate(row, gr);
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v *= s;
  if (!a.on_tape()) return Tensor(std::move(out));
  return a.tape()->record(std::move(out), [a, s](Tape& t, const Matrix& g) {
    Matrix ga = g;
    for (double& v : ga.data) v *= s;
    t.accumulate(a, ga);
  });
}

Tensor relu(const Tensor& a) {
  Matrix out = a.value();
  for (double& v : out.data) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  if (!a.on_tape()) return Tensor(std::move(out));
  return a.tape()->record(std::move(out), [a](Tape& t, const Matrix& g) {
    Matrix ga = g;
    const auto& x = a.value().data;
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      if (x[i] <= 0.0) ga.data[i] = 0.0;
    }
    t.accumulate(a, ga);
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  Tape* tape = nullptr;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + shapes(parts[0].value(), p.value()));
    }
    cols += p.cols();
    if (p.on_tape()) {
      if (tape != nullptr && tape != p.tape()) throw ContractError("operands recorded on different tapes");
      tape = p.tape();
    }
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < rows; ++i) {
      auto src = p.value().row(i);
      std::copy(src.begin(), src.end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += p.cols();
  }
  if (tape == nullptr) return Tensor(std::move(out));
  std::vector<Tensor> operands(parts.begin(), parts.end());
  return tape->record(std::move(out), [operands](Tape& t, const Matrix& g) {
    std::size_t off = 0;
    for (const Tensor& p : operands) {
      if (p.on_tape()) {
        Matrix gp(g.rows, p.cols());
        for (std::size_t i = 0; i < g.rows; ++i) {
          auto src = g.row(i).subspan(off, p.cols());
          std::copy(src.begin(), src.end(), gp.row(i).begin());
        }
        t.accumulate(p, gp);
      }
      off += p.cols();
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_cols(std::span<const Tensor>(parts));
}

Tensor row_select(const Tensor& a, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) {
      throw DimensionError("row_select: row " + std::to_string(rows[i]) + " out of range for " + a.value().shape_string());
    }
    auto src = a.value().row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  if (!a.on_tape()) return Tensor(std::move(out));
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape()->record(std::move(out), [a, idx](Tape& t, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto dst = ga.row(idx[i]);
      auto src = g.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    t.accumulate(a, ga);
  });
}

Tensor dropout(const Tensor& a, double rate, bool training, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValueError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return a;
  const double keep = 1.0 - rate;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto mask = std::make_shared<std::vector<double>>(a.value().size());
  for (double& m : *mask) m = unif(rng) < rate ? 0.0 : 1.0 / keep;
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= (*mask)[i];
  if (!a.on_tape()) return Tensor(std::move(out));
  return a.tape()->record(std::move(out), [a, mask](Tape& t, const Matrix& g) {
    Matrix ga = g;
    for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] *= (*mask)[i];
    t.accumulate(a, ga);
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.value().data) acc += v;
  Matrix out(1, 1, acc);
  if (!a.on_tape()) return Tensor(std::move(out));
  return a.tape()->record(std::move(out), [a](Tape& t, const Matrix& g) { t.accumulate(a, Matrix(a.rows(), a.cols(), g.data[0])); });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Tensor cross_entropy_smoothed(const Tensor& logits, std::span<const std::size_t> labels, double smoothing) {
  const std::size_t n = logits.rows();
  const std::size_t classes = logits.cols();
  if (labels.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
  }
  if (n == 0) throw DimensionError("cross_entropy: empty batch");
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ValueError("cross_entropy: smoothing must be in [0, 1)");
  if (smoothing > 0.0 && classes < 2) throw ValueError("cross_entropy: smoothing needs at least two classes");
  for (std::size_t y : labels) {
    if (y >= classes) {
      throw ValueError("cross_entropy: label " + std::to_string(y) + " out of range [0, " + std::to_string(classes) + ")");
    }
  }
  const double off = classes > 1 ? smoothing / static_cast<double>(classes - 1) : 0.0;
  const double on = 1.0 - smoothing;

  Matrix probs(n, classes);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto z = logits.value().row(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - mx);
    const double log_denom = std::log(denom);
    auto p = probs.row(i);
    for (std::size_t c = 0; c < classes; ++c) {
      const double log_p = z[c] - mx - log_denom;
      p[c] = std::exp(log_p);
      const double target = c == labels[i] ? on : off;
      if (target != 0.0) total -= target * log_p;
    }
  }
  Matrix out(1, 1, total / static_cast<double>(n));
  if (!logits.on_tape()) return Tensor(std::move(out));
  std::vector<std::size_t> y(labels.begin(), labels.end());
  return logits.tape()->record(std::move(out), [logits, probs = std::move(probs), y, on, off](Tape& t, const Matrix& g) {
    const double s = g.data[0] / static_cast<double>(y.size());
    Matrix gl = probs;
    for (std::size_t i = 0; i < gl.rows; ++i) {
      auto r = gl.row(i);
      for (std::size_t c = 0; c < gl.cols; ++c) r[c] = (r[c] - (c == y[i] ? on : off)) * s;
    }
    t.accumulate(logits, gl);
  });
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& opt) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.rows, p->value.cols);
      state.v.emplace_back(p->value.rows, p->value.cols);
    }
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Matrix& m = state.m[k];
    Matrix& v = state.v[k];
    if (m.size() != p.value.size()) throw DimensionError("adam: moment buffer shape mismatch for " + p.name);
    const bool have_grad = p.grad.size() == p.value.size();
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
      const double g = (have_grad ? p.grad.data[i] : 0.0) + opt.weight_decay * p.value.data[i];
      m.data[i] = opt.beta1 * m.data[i] + (1.0 - opt.beta1) * g;
      v.data[i] = opt.beta2 * v.data[i] + (1.0 - opt.beta2) * g * g;
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      p.value.data[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
    }
  }
}

}  // namespace magsim
