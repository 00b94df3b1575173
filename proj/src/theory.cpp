#include "magsim/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "magsim/aggregation.hpp"
#include "magsim/errors.hpp"
#include "magsim/seed.hpp"

namespace magsim {

void SnrParams::validate() const {
  if (!(signal_sq > 0.0)) throw ValueError("signal_sq must be positive");
  if (!(sigma_eps_sq >= 0.0) || !(sigma_n_sq >= 0.0)) throw ValueError("noise energies must be nonnegative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValueError("alpha must lie in (0, 1)");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValueError("beta must lie in [0, 1]");
}

double snr_int(const SnrParams& p) {
  p.validate();
  if (p.sigma_eps_sq == 0.0) return kInfinity;
  return p.signal_sq / p.sigma_eps_sq;
}

double snr_post(const SnrParams& p) {
  p.validate();
  const double gain = p.alpha + (1.0 - p.alpha) * p.beta;
  const double denom = p.alpha * p.alpha * p.sigma_eps_sq + (1.0 - p.alpha) * (1.0 - p.alpha) * p.sigma_n_sq;
  if (denom == 0.0) return kInfinity;
  return gain * gain * p.signal_sq / denom;
}

double tau(double alpha, double beta, double sigma_n_sq) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValueError("alpha must lie in (0, 1)");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValueError("beta must lie in [0, 1]");
  if (!(sigma_n_sq >= 0.0)) throw ValueError("sigma_n_sq must be nonnegative");
  // With no alignment every encoder-noise level is degraded.
  if (beta == 0.0) return kInfinity;
  return (1.0 - alpha) * sigma_n_sq / (beta * (2.0 * alpha + (1.0 - alpha) * beta));
}

Crossover crossover(const SnrParams& p) {
  p.validate();
  Crossover c;
  c.degraded = p.sigma_eps_sq < tau(p.alpha, p.beta, p.sigma_n_sq);
  if (p.sigma_eps_sq == 0.0) {
    // snr_int is infinite; post-aggregation is finite unless sigma_N^2 = 0 too.
    c.margin = p.sigma_n_sq == 0.0 ? 0.0 : -kInfinity;
    return c;
  }
  // snr_post - snr_int over a common denominator:
  // ||s||^2 (A sigma_eps^2 - (1 - alpha)^2 sigma_N^2) / (sigma_eps^2 D),
  // A = (1 - alpha) b, b = beta (2 alpha + (1 - alpha) beta).
  // The numerator equals (1 - alpha) b (sigma_eps^2 - tau), which is exactly
  // zero at the threshold.
  const double one_minus = 1.0 - p.alpha;
  const double b = p.beta * (2.0 * p.alpha + one_minus * p.beta);
  const double d = p.alpha * p.alpha * p.sigma_eps_sq + one_minus * one_minus * p.sigma_n_sq;
  const double num = b == 0.0 ? -one_minus * one_minus * p.sigma_n_sq
                              : one_minus * b * (p.sigma_eps_sq - tau(p.alpha, p.beta, p.sigma_n_sq));
  c.margin = p.signal_sq * num / (p.sigma_eps_sq * d);
  return c;
}

double mc_snr_post(const SnrParams& p, std::size_t dim, std::size_t num_samples, std::uint64_t seed) {
  p.validate();
  if (dim == 0) throw ValueError("mc_snr_post: dim must be positive");
  if (num_samples < 1000) throw ValueError("mc_snr_post: need at least 1000 samples");
  if (p.sigma_eps_sq == 0.0 && p.sigma_n_sq == 0.0) return kInfinity;

  const double gain = p.alpha + (1.0 - p.alpha) * p.beta;
  std::vector<double> s(dim, 0.0);
  s[0] = std::sqrt(p.signal_sq);
  std::vector<double> cs(dim);
  for (std::size_t j = 0; j < dim; ++j) cs[j] = gain * s[j];

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double eps_sd = std::sqrt(p.sigma_eps_sq / static_cast<double>(dim));
  const double xi_sd = std::sqrt(p.sigma_n_sq / static_cast<double>(dim));
  double noise_energy = 0.0;
  for (std::size_t k = 0; k < num_samples; ++k) {
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double eps = eps_sd * gauss(rng);
      const double xi = xi_sd * gauss(rng);
      const double h = cs[j] + p.alpha * eps + (1.0 - p.alpha) * xi;
      const double r = h - cs[j];
      sq += r * r;
    }
    noise_energy += sq;
  }
  noise_energy /= static_cast<double>(num_samples);
  double signal = 0.0;
  for (double v : cs) signal += v * v;
  return signal / noise_energy;
}

EtaMode EtaMode::gnn(std::size_t layers, double alpha) {
  if (layers < 1) throw ValueError("gnn routing needs at least one layer");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValueError("alpha must lie in (0, 1)");
  return EtaMode(layers, alpha);
}

double EtaMode::eta() const { return is_bypass() ? 1.0 : std::pow(alpha_, static_cast<double>(layers_)); }

double starvation_bound(const EtaMode& mode, double residual, double w_norm, double jac_norm) {
  return mode.eta() * std::abs(residual) * w_norm * jac_norm;
}

CsrMatrix directed_chain(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t v = 1; v < n; ++v) edges.emplace_back(v, v - 1);
  return CsrMatrix::from_edges(n, edges, /*symmetrize=*/false).row_normalized();
}

double autodiff_ego_gradient(const CsrMatrix& adj, double alpha, std::size_t layers, std::size_t node) {
  if (node >= adj.num_rows()) throw ValueError("autodiff_ego_gradient: node out of range");
  Tape tape;
  std::mt19937_64 rng(0);
  StackOptions opts{StackVariant::MeanMix, layers, alpha, /*weights=*/false, /*activation=*/false};
  GnnStack stack("ego", opts, 1, 1, rng);
  Matrix h0(adj.num_rows(), 1);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (double& v : h0.data) v = unif(rng);
  Tensor h = tape.variable(std::move(h0));
  ForwardContext ctx{&tape, false, 0.0, nullptr};
  Tensor out = stack.forward(ctx, adj, h);
  const std::size_t rows[] = {node};
  tape.backward(sum(row_select(out, rows)));
  return tape.grad(h)(node, 0);
}

StarvationMeasurement measure_linear_starvation(const StarvationSpec& spec, std::uint64_t seed) {
  if (spec.num_nodes < 1 || spec.in_dim < 1 || spec.hidden < 1) throw ValueError("starvation spec needs positive sizes");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const std::size_t n = spec.num_nodes;

  // Random DAG: in-neighbors of v are drawn from lower indices only.
  std::vector<Edge> edges;
  for (std::size_t v = 1; v < n; ++v) {
    for (std::size_t u = 0; u < v; ++u) {
      if (coin(rng) < 0.5) edges.emplace_back(v, u);
    }
  }
  const CsrMatrix adj = CsrMatrix::from_edges(n, edges, false).row_normalized();
  const std::size_t target = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);

  Matrix x(n, spec.in_dim);
  for (std::size_t j = 0; j < spec.in_dim; ++j) x(target, j) = gauss(rng);
  Parameter w_enc("f_v.weight", Matrix(spec.in_dim, spec.hidden));
  for (double& v : w_enc.value.data) v = gauss(rng);
  Matrix w_v(spec.hidden, 1);
  for (double& v : w_v.data) v = gauss(rng);
  Matrix strong(1, spec.hidden);
  Matrix w_t(spec.hidden, 1);
  for (double& v : strong.data) v = gauss(rng);
  for (double& v : w_t.data) v = gauss(rng);
  const double y = gauss(rng);

  Tape tape;
  ForwardContext ctx{&tape, false, 0.0, nullptr};
  Tensor h = matmul(Tensor(x), ctx.bind(w_enc));
  if (spec.relu_encoder) h = relu(h);
  if (spec.layers > 0) {
    std::mt19937_64 unused(0);
    StackOptions opts{StackVariant::MeanMix, spec.layers, spec.alpha, false, false};
    GnnStack stack("route", opts, spec.hidden, spec.hidden, unused);
    h = stack.forward(ctx, adj, h);
  }
  const std::size_t rows[] = {target};
  Tensor weak = matmul(row_select(h, rows), Tensor(w_v));
  Tensor strong_term = matmul(Tensor(strong), Tensor(w_t));
  Tensor residual = sub(add(weak, strong_term), Tensor(Matrix(1, 1, y)));
  Tensor loss = scale(mul(residual, residual), 0.5);
  w_enc.zero_grad();
  tape.backward(loss);

  StarvationMeasurement m;
  m.grad_norm = l2_norm(w_enc.grad.data);
  m.residual = residual.item();
  m.w_norm = l2_norm(w_v.data);
  m.jac_norm = l2_norm(x.row(target));
  const EtaMode mode = spec.layers == 0 ? EtaMode::bypass() : EtaMode::gnn(spec.layers, spec.alpha);
  m.bound = starvation_bound(mode, m.residual, m.w_norm, m.jac_norm);
  return m;
}

namespace {

SnrParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) { return std::exp(std::log(lo) + unit(rng) * (std::log(hi) - std::log(lo))); };
  SnrParams p;
  p.signal_sq = log_uniform(0.1, 10.0);
  p.sigma_eps_sq = log_uniform(1e-3, 10.0);
  p.sigma_n_sq = log_uniform(1e-3, 10.0);
  p.alpha = 0.02 + 0.96 * unit(rng);
  p.beta = 0.01 + 0.99 * unit(rng);
  return p;
}

}  // namespace

std::vector<PropertyResult> run_theory_checks(std::uint64_t seed) {
  std::vector<PropertyResult> results;

  {
    std::mt19937_64 rng(derive_seed(seed, "theory.iff"));
    std::size_t violations = 0;
    double worst_margin = 0.0;
    for (int k = 0; k < 1000; ++k) {
      SnrParams p = random_params(rng);
      const bool lhs = snr_post(p) < snr_int(p);
      const bool rhs = p.sigma_eps_sq < tau(p.alpha, p.beta, p.sigma_n_sq);
      if (lhs != rhs) ++violations;
      p.sigma_eps_sq = tau(p.alpha, p.beta, p.sigma_n_sq);
      worst_margin = std::max(worst_margin, std::abs(crossover(p).margin));
    }
    std::ostringstream os;
    os << "1000 draws, " << violations << " iff violations, max |margin| at threshold " << worst_margin;
    results.push_back({"threshold iff-check", violations == 0 && worst_margin < 1e-12, os.str()});
  }
  {
    std::mt19937_64 rng(derive_seed(seed, "theory.mc"));
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      SnrParams p = random_params(rng);
      const double exact = snr_post(p);
      const double mc = mc_snr_post(p, 16, 20000, derive_seed(seed, {0x4d43u, static_cast<std::uint64_t>(k)}));
      worst = std::max(worst, std::abs(mc - exact) / exact);
    }
    std::ostringstream os;
    os << "20 parameter sets x 2e4 samples, max rel. error " << worst;
    results.push_back({"monte-carlo agreement", worst < 0.05, os.str()});
  }
  {
    const CsrMatrix chain = directed_chain(50);
    double worst_closed = 0.0;
    double worst_ad = 0.0;
    for (double alpha : {0.3, 0.5, 0.9}) {
      for (std::size_t layers = 1; layers <= 4; ++layers) {
        for (std::size_t node : {std::size_t{0}, std::size_t{7}, std::size_t{49}}) {
          const double diag = ego_jacobian_diag(chain, alpha, layers, node);
          worst_closed = std::max(worst_closed, std::abs(diag - std::pow(alpha, static_cast<double>(layers))));
          worst_ad = std::max(worst_ad, std::abs(autodiff_ego_gradient(chain, alpha, layers, node) - diag));
        }
      }
    }
    std::ostringstream os;
    os << "max |diag - alpha^L| " << worst_closed << ", max |autodiff - diag| " << worst_ad;
    results.push_back({"alpha^L ego dilution", worst_closed <= 1e-12 && worst_ad <= 1e-10, os.str()});
  }
  {
    std::size_t violations = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
      StarvationSpec spec;
      spec.layers = k % 4;
      spec.alpha = 0.2 + 0.7 * static_cast<double>(k % 7) / 6.0;
      const auto m = measure_linear_starvation(spec, derive_seed(seed, {0x5354u, k}));
      if (m.grad_norm > m.bound * (1.0 + 1e-9)) ++violations;
    }
    std::ostringstream os;
    os << "100 instances, " << violations << " violations";
    results.push_back({"starvation bound", violations == 0, os.str()});
  }
  return results;
}

}  // namespace magsim
