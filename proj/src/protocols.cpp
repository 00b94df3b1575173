#include "magsim/protocols.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "magsim/errors.hpp"
#include "magsim/metrics.hpp"
#include "magsim/seed.hpp"
#include "magsim/theory.hpp"
#include "magsim/train.hpp"

namespace magsim {

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is
// rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < std::min(jobs, n); ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

SweepResult sweep_noise(const Mag& base, const SweepOptions& opts) {
  if (opts.scales.empty() || opts.kinds.empty() || opts.seeds.empty()) {
    throw ValueError("sweep needs at least one scale, kind and seed");
  }
  std::vector<TrainConfig> kind_cfgs;
  for (const auto& k : opts.kinds) kind_cfgs.push_back(apply_kind_label(opts.base, k));

  const Mag annotated = with_estimated_signals(base);
  const std::size_t ns = opts.scales.size();
  const std::size_t nseed = opts.seeds.size();
  const std::size_t nk = opts.kinds.size();

  // Noisy datasets per (scale, seed), built up front so cells share them.
  std::vector<Mag> noisy(ns * nseed);
  parallel_for(ns * nseed, opts.jobs, [&](std::size_t i) {
    const std::size_t si = i / nseed;
    noisy[i] = inject_noise(annotated, opts.scales[si], derive_seed(opts.seeds[i % nseed], {1, si}));
  });

  SweepResult result;
  result.rows.resize(ns * nseed * nk);
  parallel_for(result.rows.size(), opts.jobs, [&](std::size_t i) {
    const std::size_t k = i % nk;
    const std::size_t cell = i / nk;
    const std::size_t si = cell / nseed;
    const std::uint64_t seed = opts.seeds[cell % nseed];
    TrainConfig cfg = kind_cfgs[k];
    cfg.seed = derive_seed(seed, {2, si});
    const TrainReport report = train(noisy[cell], cfg);
    result.rows[i] = {opts.scales[si], opts.kinds[k], seed, report.test_acc, report.test_f1};
  });

  for (std::size_t si = 0; si < ns; ++si) {
    const Mag& mag = noisy[si * nseed];
    for (const auto& mod : mag.modalities) {
      TauRow t;
      t.scale = opts.scales[si];
      t.modality = mod.name;
      t.beta_hat = measure_alignment(mag, mod.name);
      t.sigma_n_sq = measure_neighborhood_noise(mag, mod.name, t.beta_hat);
      t.sigma_eps_sq = measure_encoder_noise(mag, mod.name);
      t.tau = t.beta_hat > 0.0 ? tau(opts.base.alpha, std::min(t.beta_hat, 1.0), t.sigma_n_sq) : kInfinity;
      result.tau.push_back(t);
    }
  }
  return result;
}

std::vector<GradRow> track_gradients(const Mag& mag, const GradOptions& opts) {
  if (opts.epochs < 1) throw ValueError("track_gradients needs at least one epoch");
  std::vector<GradRow> rows;
  for (const auto& variant : opts.variants) {
    TrainConfig cfg = apply_kind_label(opts.base, variant);
    cfg.seed = opts.seed;
    cfg.max_epochs = opts.epochs;
    FitOptions fo;
    fo.early_stopping = false;
    fo.track_validation = false;
    const FitResult fr = fit(mag, cfg, fo);
    for (const auto& e : fr.report.epochs) {
      for (const auto& [branch, norm] : e.grad_norms) rows.push_back({e.epoch, variant, branch, norm});
    }
  }
  return rows;
}

std::vector<ProbeRow> corruption_probe(const Mag& mag, const ProbeOptions& opts) {
  mag.modality_index(opts.dominant);
  std::vector<ProbeRow> rows;
  for (const auto& kind : opts.kinds) {
    for (std::uint64_t seed : opts.seeds) {
      TrainConfig cfg = apply_kind_label(opts.base, kind);
      cfg.seed = seed;
      FitResult fr = fit(mag, cfg);
      const Mag corrupted = corrupt_modality(mag, opts.dominant, derive_seed(seed, "probe"));
      ProbeRow row;
      row.kind = kind;
      row.seed = seed;
      row.f = fr.report.test_f1;
      row.d = evaluate(*fr.model, corrupted, mag.splits.test).f1;
      row.h = harmonic_mean(row.f, row.d);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "scale,kind,seed,acc,f1\n";
  for (const auto& r : rows) {
    out += fmt6(r.scale) + "," + r.kind + "," + std::to_string(r.seed) + "," + fmt6(r.acc) + "," + fmt6(r.f1) + "\n";
  }
  return out;
}

std::string tau_csv(const std::vector<TauRow>& rows) {
  std::string out = "scale,modality,beta_hat,sigma_n_sq,sigma_eps_sq,tau\n";
  for (const auto& r : rows) {
    out += fmt6(r.scale) + "," + r.modality + "," + fmt6(r.beta_hat) + "," + fmt6(r.sigma_n_sq) + "," +
           fmt6(r.sigma_eps_sq) + "," + fmt6(r.tau) + "\n";
  }
  return out;
}

std::string grads_csv(const std::vector<GradRow>& rows) {
  std::string out = "epoch,variant,branch,grad_l2\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + "," + r.variant + "," + r.branch + "," + fmt6(r.grad_l2) + "\n";
  }
  return out;
}

std::string probe_csv(const std::vector<ProbeRow>& rows) {
  std::string out = "kind,seed,F,D,H\n";
  for (const auto& r : rows) {
    out += r.kind + "," + std::to_string(r.seed) + "," + fmt6(r.f) + "," + fmt6(r.d) + "," + fmt6(r.h) + "\n";
  }
  return out;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

nlohmann::ordered_json make_manifest(const std::string& command, std::uint64_t seed, const nlohmann::ordered_json& config) {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  return j;
}

}  // namespace magsim
