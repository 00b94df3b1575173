#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "magsim/csr.hpp"

namespace magsim {

/// Returned wherever a variance in a denominator is exactly zero.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct SnrParams {
  double signal_sq = 1.0;     // ||s||^2
  double sigma_eps_sq = 1.0;  // encoder noise energy E||eps||^2
  double sigma_n_sq = 1.0;    // neighborhood noise energy E||xi||^2
  double alpha = 0.5;         // self-retention, in (0, 1)
  double beta = 1.0;          // neighbor alignment, in [0, 1]

  /// Throws ValueError if any field is out of range.
  void validate() const;
};

/// ||s||^2 / sigma_eps^2.
double snr_int(const SnrParams& p);

/// (alpha + (1 - alpha) beta)^2 ||s||^2 / (alpha^2 sigma_eps^2 + (1 - alpha)^2 sigma_N^2).
double snr_post(const SnrParams& p);

/// Critical encoder-noise level below which one mean-aggregation step lowers
/// the SNR: (1 - alpha) sigma_N^2 / (beta (2 alpha + (1 - alpha) beta)).
double tau(double alpha, double beta, double sigma_n_sq);

struct Crossover {
  bool degraded = false;  // sigma_eps^2 < tau
  double margin = 0.0;    // snr_post - snr_int
};

Crossover crossover(const SnrParams& p);

/// Monte Carlo estimate of the post-aggregation SNR. Draws eps and xi as
/// isotropic Gaussians in `dim` dimensions with total energies sigma_eps^2
/// and sigma_N^2, forms h = c s + alpha eps + (1 - alpha) xi with
/// c = alpha + (1 - alpha) beta, and returns ||c s||^2 / mean ||h - c s||^2.
double mc_snr_post(const SnrParams& p, std::size_t dim, std::size_t num_samples, std::uint64_t seed);

/// Attenuation factor: alpha^L through L mean-aggregation layers, or 1 for
/// a path that bypasses propagation.
class EtaMode {
 public:
  static EtaMode gnn(std::size_t layers, double alpha);
  static EtaMode bypass() { return EtaMode(0, 1.0); }

  double eta() const;
  std::size_t layers() const { return layers_; }
  double alpha() const { return alpha_; }
  bool is_bypass() const { return layers_ == 0; }

 private:
  EtaMode(std::size_t layers, double alpha) : layers_(layers), alpha_(alpha) {}
  std::size_t layers_;
  double alpha_;
};

/// eta * |r| * ||w_v|| * ||d h / d f_v||.
double starvation_bound(const EtaMode& mode, double residual, double w_norm, double jac_norm);

/// Two-branch linear-head construction: y_hat = w_t . h_t + w_v . h_v with a
/// squared-error loss on one node. The weak encoder is f_v(x) = relu(x W)
/// (or x W), optionally routed through `layers` activation-free
/// mean-aggregation layers on a random DAG. Only the target node carries
/// weak-modality input, so every gradient reaching W flows along the ego path.
struct StarvationSpec {
  std::size_t num_nodes = 8;
  std::size_t in_dim = 5;
  std::size_t hidden = 4;
  std::size_t layers = 0;  // 0 = bypass
  double alpha = 0.5;
  bool relu_encoder = true;
};

struct StarvationMeasurement {
  double grad_norm = 0.0;  // ||dL/dW|| by autodiff
  double residual = 0.0;   // y_hat - y
  double w_norm = 0.0;     // ||w_v||
  double jac_norm = 0.0;   // ||x_i||, an upper bound on ||d h_i / d W||
  double bound = 0.0;
};

StarvationMeasurement measure_linear_starvation(const StarvationSpec& spec, std::uint64_t seed);

/// d(h_L[node]) / d(h_0[node]) through `layers` activation-free mean-aggregation
/// layers, measured with the autodiff tape.
double autodiff_ego_gradient(const CsrMatrix& adj, double alpha, std::size_t layers, std::size_t node);

/// Row-normalized adjacency of the directed chain 0 -> 1 -> ... -> n-1
/// (row v holds in-neighbor v-1).
CsrMatrix directed_chain(std::size_t n);

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Runs the four theory properties with default grids: threshold iff-check,
/// Monte Carlo agreement, alpha^L ego dilution, and the starvation bound.
std::vector<PropertyResult> run_theory_checks(std::uint64_t seed);

}  // namespace magsim
