#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "magsim/csr.hpp"
#include "magsim/tensor.hpp"

namespace testing {

using magsim::Matrix;
using magsim::Tape;
using magsim::Tensor;

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.data) v = g(rng);
  return m;
}

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

using Builder = std::function<Tensor(const std::vector<Tensor>&)>;

/// Largest normwise relative error between tape gradients and central
/// differences over all inputs.
inline double fd_check(const std::vector<Matrix>& inputs, const Builder& build, double h = 1e-5) {
  Tape tape;
  std::vector<Tensor> leaves;
  for (const auto& m : inputs) leaves.push_back(tape.variable(m));
  tape.backward(build(leaves));

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Matrix ad = tape.grad(leaves[i]);
    std::vector<double> diff(ad.size());
    std::vector<double> fd(ad.size());
    for (std::size_t j = 0; j < ad.size(); ++j) {
      auto eval = [&](double delta) {
        std::vector<Tensor> consts;
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          Matrix m = inputs[k];
          if (k == i) m.data[j] += delta;
          consts.emplace_back(std::move(m));
        }
        return build(consts).item();
      };
      fd[j] = (eval(h) - eval(-h)) / (2.0 * h);
      diff[j] = fd[j] - ad.data[j];
    }
    const double scale = std::max({norm(ad.data), norm(fd), 1e-6});
    worst = std::max(worst, norm(diff) / scale);
  }
  return worst;
}

struct OpCase {
  std::string name;
  std::function<std::pair<std::vector<Matrix>, Builder>(std::mt19937_64&)> make;
};

// Reduces an op output to a scalar with random weights so every output
// entry contributes a distinct coefficient.
inline Tensor weighted_sum(const Tensor& t, const Matrix& w) { return magsim::sum(magsim::mul(t, Tensor(w))); }

inline magsim::CsrMatrix random_graph(std::size_t n, std::mt19937_64& rng) {
  std::vector<magsim::Edge> edges;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t e = 0; e < 2 * n; ++e) edges.emplace_back(pick(rng), pick(rng));
  return magsim::CsrMatrix::from_edges(n, edges, true).row_normalized();
}

/// One entry per differentiable op.
inline std::vector<OpCase> op_cases() {
  using namespace magsim;
  std::vector<OpCase> cases;
  cases.push_back({"matmul", [](std::mt19937_64& rng) {
                     const std::size_t n = 2 + rng() % 4, k = 2 + rng() % 4, m = 2 + rng() % 4;
                     Matrix w = random_matrix(n, m, rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(n, k, rng), random_matrix(k, m, rng)},
                                           Builder([w](const std::vector<Tensor>& x) { return weighted_sum(matmul(x[0], x[1]), w); }));
                   }});
  cases.push_back({"spmm", [](std::mt19937_64& rng) {
                     const std::size_t n = 4 + rng() % 6, d = 1 + rng() % 4;
                     auto adj = std::make_shared<CsrMatrix>(random_graph(n, rng));
                     Matrix w = random_matrix(n, d, rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(n, d, rng)},
                                           Builder([adj, w](const std::vector<Tensor>& x) { return weighted_sum(spmm(*adj, x[0]), w); }));
                   }});
  cases.push_back({"add", [](std::mt19937_64& rng) {
                     Matrix w = random_matrix(3, 4, rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(3, 4, rng), random_matrix(3, 4, rng)},
                                           Builder([w](const std::vector<Tensor>& x) { return weighted_sum(add(x[0], x[1]), w); }));
                   }});
  cases.push_back({"sub", [](std::mt19937_64& rng) {
                     Matrix w = random_matrix(3, 2, rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(3, 2, rng), random_matrix(3, 2, rng)},
                                           Builder([w](const std::vector<Tensor>& x) { return weighted_sum(sub(x[0], x[1]), w); }));
                   }});
  cases.push_back({"mul", [](std::mt19937_64& rng) {
                     Matrix w = random_matrix(4, 3, rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(4, 3, rng), random_matrix(4, 3, rng)},
                                           Builder([w](const std::vector<Tensor>& x) { return weighted_sum(mul(x[0], x[1]), w); }));
                   }});
  cases.push_back({"add_row", [](std::mt19937_64& rng) {
                     Matrix w = random_matrix(5, 3, rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(5, 3, rng), random_matrix(1, 3, rng)},
                                           Builder([w](const std::vector<Tensor>& x) { return weighted_sum(add_row(x[0], x[1]), w); }));
                   }});
  cases.push_back({"scale", [](std::mt19937_64& rng) {
                     Matrix w = random_matrix(3, 3, rng);
                     const double s = std::normal_distribution<double>(0.0, 2.0)(rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(3, 3, rng)},
                                           Builder([w, s](const std::vector<Tensor>& x) { return weighted_sum(scale(x[0], s), w); }));
                   }});
  cases.push_back({"relu", [](std::mt19937_64& rng) {
                     Matrix x = random_matrix(4, 5, rng);
                     for (double& v : x.data) {
                       if (std::abs(v) < 1e-2) v = v < 0 ? -0.1 : 0.1;  // keep clear of the kink
                     }
                     Matrix w = random_matrix(4, 5, rng);
                     return std::make_pair(std::vector<Matrix>{x},
                                           Builder([w](const std::vector<Tensor>& in) { return weighted_sum(relu(in[0]), w); }));
                   }});
  cases.push_back({"concat_cols", [](std::mt19937_64& rng) {
                     Matrix w = random_matrix(3, 5, rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(3, 2, rng), random_matrix(3, 3, rng)},
                                           Builder([w](const std::vector<Tensor>& x) { return weighted_sum(concat_cols(x[0], x[1]), w); }));
                   }});
  cases.push_back({"row_select", [](std::mt19937_64& rng) {
                     std::vector<std::size_t> rows{3, 0, 3, 1};
                     Matrix w = random_matrix(rows.size(), 2, rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(5, 2, rng)},
                                           Builder([w, rows](const std::vector<Tensor>& x) { return weighted_sum(row_select(x[0], rows), w); }));
                   }});
  cases.push_back({"dropout", [](std::mt19937_64& rng) {
                     const std::uint64_t seed = rng();
                     Matrix w = random_matrix(6, 4, rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(6, 4, rng)},
                                           Builder([w, seed](const std::vector<Tensor>& x) {
                                             std::mt19937_64 mask_rng(seed);  // same mask on every evaluation
                                             return weighted_sum(dropout(x[0], 0.4, true, mask_rng), w);
                                           }));
                   }});
  cases.push_back({"sum", [](std::mt19937_64& rng) {
                     return std::make_pair(std::vector<Matrix>{random_matrix(3, 4, rng)},
                                           Builder([](const std::vector<Tensor>& x) { return sum(mul(x[0], x[0])); }));
                   }});
  cases.push_back({"mean", [](std::mt19937_64& rng) {
                     return std::make_pair(std::vector<Matrix>{random_matrix(4, 2, rng)},
                                           Builder([](const std::vector<Tensor>& x) { return mean(mul(x[0], x[0])); }));
                   }});
  cases.push_back({"cross_entropy_smoothed", [](std::mt19937_64& rng) {
                     const std::size_t n = 3 + rng() % 4, c = 2 + rng() % 4;
                     std::vector<std::size_t> labels(n);
                     for (auto& l : labels) l = rng() % c;
                     const double s = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
                     return std::make_pair(std::vector<Matrix>{random_matrix(n, c, rng, 2.0)},
                                           Builder([labels, s](const std::vector<Tensor>& x) {
                                             return cross_entropy_smoothed(x[0], labels, s);
                                           }));
                   }});
  return cases;
}

}  // namespace testing
