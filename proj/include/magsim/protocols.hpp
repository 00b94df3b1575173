#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "magsim/graph.hpp"
#include "magsim/models.hpp"

namespace magsim {

inline constexpr const char* kVersion = "magsim 0.1.0";

// Noise sweep.

struct SweepRow {
  double scale = 0.0;
  std::string kind;
  std::uint64_t seed = 0;
  double acc = 0.0;
  double f1 = 0.0;
};

/// Measured crossover quantities of one modality at one noise scale.
struct TauRow {
  double scale = 0.0;
  std::string modality;
  double beta_hat = 0.0;
  double sigma_n_sq = 0.0;
  double sigma_eps_sq = 0.0;
  double tau = 0.0;
};

struct SweepOptions {
  std::vector<double> scales;
  std::vector<std::string> kinds;
  std::vector<std::uint64_t> seeds;
  TrainConfig base;
  std::size_t jobs = 1;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by scale, seed, kind
  std::vector<TauRow> tau;     // ordered by scale, modality (first seed's noise draw)
};

/// For every (scale, seed): inject noise, then train each kind. Cells are
/// independent and may run on `jobs` threads; output order is fixed.
SweepResult sweep_noise(const Mag& base, const SweepOptions& opts);

// Gradient tracking.

struct GradRow {
  std::size_t epoch = 0;
  std::string variant;
  std::string branch;
  double grad_l2 = 0.0;
};

struct GradOptions {
  std::vector<std::string> variants;
  std::size_t epochs = 100;
  TrainConfig base;
  std::uint64_t seed = 0;
};

/// Trains each variant for exactly `epochs` epochs and records every
/// branch's gradient norm per epoch.
std::vector<GradRow> track_gradients(const Mag& mag, const GradOptions& opts);

// Corruption probe.

struct ProbeRow {
  std::string kind;
  std::uint64_t seed = 0;
  double f = 0.0;  // clean test macro-F1
  double d = 0.0;  // macro-F1 with the dominant modality corrupted
  double h = 0.0;
};

struct ProbeOptions {
  std::vector<std::string> kinds;
  std::vector<std::uint64_t> seeds;
  std::string dominant;
  TrainConfig base;
};

std::vector<ProbeRow> corruption_probe(const Mag& mag, const ProbeOptions& opts);

// Output. Columns: sweep "scale,kind,seed,acc,f1"; grads
// "epoch,variant,branch,grad_l2"; probe "kind,seed,F,D,H"; tau
// "scale,modality,beta_hat,sigma_n_sq,sigma_eps_sq,tau". Reals use %.6f.

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string tau_csv(const std::vector<TauRow>& rows);
std::string grads_csv(const std::vector<GradRow>& rows);
std::string probe_csv(const std::vector<ProbeRow>& rows);

/// Writes via a temporary file and rename. Throws IoError.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

/// Manifest next to a CSV: {"version", "command", "seed", "config", ...extra}.
nlohmann::ordered_json make_manifest(const std::string& command, std::uint64_t seed, const nlohmann::ordered_json& config);

}  // namespace magsim
