#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "magsim/dataset_io.hpp"
#include "magsim/errors.hpp"
#include "magsim/graph.hpp"
#include "magsim/protocols.hpp"
#include "magsim/run_config.hpp"
#include "magsim/seed.hpp"
#include "magsim/theory.hpp"
#include "magsim/train.hpp"

namespace fs = std::filesystem;
using namespace magsim;

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kIo = 3, kNumeric = 4, kTheory = 5 };

struct Common {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("magsim");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("MAGSIM_LOG");
  std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

RunConfig resolve(const Common& c) {
  RunConfig rc = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) {
    rc.synthetic.seed = *c.seed;
    rc.train.seed = *c.seed;
  }
  spdlog::info("config {}", to_json(rc).dump());
  return rc;
}

std::uint64_t base_seed(const Common& c, const RunConfig& rc) { return c.seed ? *c.seed : rc.train.seed; }

Mag obtain_dataset(const Common& c, const RunConfig& rc) {
  if (!c.data.empty()) {
    spdlog::info("loading dataset {}", c.data);
    return load_dataset(c.data);
  }
  spdlog::info("generating dataset from config (seed {})", rc.synthetic.seed);
  return generate(rc.synthetic);
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, std::size_t n) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n; ++i) seeds.push_back(base + i);
  return seeds;
}

fs::path manifest_path(const fs::path& out) {
  fs::path p = out;
  return p.replace_extension(".manifest.json");
}

void require_out(const Common& c, const char* cmd) {
  if (c.out.empty()) throw ConfigError(std::string(cmd) + ": --out is required");
}

int cmd_gen(const Common& c) {
  require_out(c, "gen");
  const RunConfig rc = resolve(c);
  const Mag mag = generate(rc.synthetic);
  save_dataset(mag, c.out);
  std::printf("nodes %zu edges %zu same_class_edges %.6f\n", mag.num_nodes, mag.adjacency.nnz() / 2,
              same_class_edge_fraction(mag));
  std::printf("modality beta_hat sigma_n_sq snr_int tau\n");
  for (const auto& m : mag.modalities) {
    const double beta = measure_alignment(mag, m.name);
    const double sn = measure_neighborhood_noise(mag, m.name, beta);
    SnrParams p;
    p.signal_sq = signal_energy(mag, m.name);
    p.sigma_eps_sq = measure_encoder_noise(mag, m.name);
    const double t = beta > 0.0 ? tau(rc.train.alpha, std::min(beta, 1.0), sn) : kInfinity;
    std::printf("%s %.6f %.6f %.6f %.6f\n", m.name.c_str(), beta, sn, snr_int(p), t);
  }
  return kOk;
}

int cmd_train(const Common& c) {
  const RunConfig rc = resolve(c);
  const Mag mag = obtain_dataset(c, rc);
  const TrainReport report = train(mag, rc.train);
  if (!c.out.empty()) write_text_atomic(c.out, report.to_json().dump(2) + "\n");
  std::printf("%s %.6f %.6f %zu %.3f\n", kind_label(rc.train).c_str(), report.test_acc, report.test_f1,
              report.epochs_trained(), report.seconds);
  return kOk;
}

int cmd_sweep(const Common& c, const std::vector<double>& scales, const std::vector<std::string>& kinds) {
  require_out(c, "sweep-noise");
  RunConfig rc = resolve(c);
  if (!scales.empty()) rc.experiments.scales = scales;
  if (!kinds.empty()) rc.experiments.sweep_kinds = kinds;
  const Mag mag = obtain_dataset(c, rc);
  SweepOptions opts;
  opts.scales = rc.experiments.scales;
  opts.kinds = rc.experiments.sweep_kinds;
  opts.seeds = seed_list(base_seed(c, rc), rc.experiments.num_seeds);
  opts.base = rc.train;
  opts.jobs = c.jobs;
  const SweepResult res = sweep_noise(mag, opts);
  const fs::path out = c.out;
  write_text_atomic(out, sweep_csv(res.rows));
  fs::path tau_path = out;
  tau_path.replace_extension(".tau.csv");
  write_text_atomic(tau_path, tau_csv(res.tau));
  write_text_atomic(manifest_path(out), make_manifest("sweep-noise", base_seed(c, rc), to_json(rc)).dump(2) + "\n");
  std::printf("wrote %zu rows to %s\n", res.rows.size(), out.string().c_str());
  return kOk;
}

int cmd_grads(const Common& c, std::size_t epochs) {
  require_out(c, "track-grads");
  RunConfig rc = resolve(c);
  if (epochs > 0) rc.experiments.grad_epochs = epochs;
  const Mag mag = obtain_dataset(c, rc);
  GradOptions opts;
  opts.variants = rc.experiments.grad_variants;
  opts.epochs = rc.experiments.grad_epochs;
  opts.base = rc.train;
  opts.seed = base_seed(c, rc);
  const auto rows = track_gradients(mag, opts);
  write_text_atomic(c.out, grads_csv(rows));
  write_text_atomic(manifest_path(c.out), make_manifest("track-grads", opts.seed, to_json(rc)).dump(2) + "\n");
  std::printf("wrote %zu rows to %s\n", rows.size(), c.out.c_str());
  return kOk;
}

int cmd_corrupt(const Common& c, const std::string& dominant) {
  require_out(c, "corrupt");
  RunConfig rc = resolve(c);
  if (!dominant.empty()) rc.experiments.dominant_modality = dominant;
  const Mag mag = obtain_dataset(c, rc);
  ProbeOptions opts;
  opts.kinds = rc.experiments.probe_kinds;
  opts.seeds = seed_list(base_seed(c, rc), rc.experiments.num_seeds);
  opts.dominant = rc.experiments.dominant_modality;
  opts.base = rc.train;
  const auto rows = corruption_probe(mag, opts);
  write_text_atomic(c.out, probe_csv(rows));
  write_text_atomic(manifest_path(c.out), make_manifest("corrupt", base_seed(c, rc), to_json(rc)).dump(2) + "\n");
  for (const auto& r : rows) std::printf("%s %llu F=%.6f D=%.6f H=%.6f\n", r.kind.c_str(), (unsigned long long)r.seed, r.f, r.d, r.h);
  return kOk;
}

int cmd_theory(const Common& c) {
  const std::uint64_t seed = c.seed.value_or(0);
  const auto results = run_theory_checks(seed);
  std::size_t passed = 0;
  for (const auto& r : results) {
    std::printf("%s %s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    passed += r.pass ? 1 : 0;
  }
  std::printf("%zu/%zu properties PASS\n", passed, results.size());
  return passed == results.size() ? kOk : kTheory;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal attributed graph simulator: data generation, training, diagnostics and theory checks"};
  app.require_subcommand(1);
  Common common;
  std::vector<double> scales;
  std::vector<std::string> kinds;
  std::size_t epochs = 0;
  std::string dominant;

  auto add_common = [&](CLI::App* sub, bool data, bool jobs) {
    sub->add_option("--config", common.config, "Run configuration JSON")->check(CLI::ExistingFile);
    if (data) sub->add_option("--data", common.data, "Dataset directory (default: generate from config)");
    sub->add_option("--out", common.out, "Output path");
    sub->add_option("--seed", common.seed, "Base seed for every random stream");
    if (jobs) sub->add_option("--jobs", common.jobs, "Parallel sweep cells")->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset into --out");
  add_common(gen, false, false);
  auto* tr = app.add_subcommand("train", "Train one model and write its report JSON to --out");
  add_common(tr, true, false);
  auto* sweep = app.add_subcommand("sweep-noise", "Accuracy versus injected feature noise");
  add_common(sweep, true, true);
  sweep->add_option("--scales", scales, "Noise scales, comma separated")->delimiter(',');
  sweep->add_option("--kinds", kinds, "Model kinds, comma separated")->delimiter(',');
  auto* grads = app.add_subcommand("track-grads", "Per-epoch branch gradient norms");
  add_common(grads, true, false);
  grads->add_option("--epochs", epochs, "Epochs per variant (default from config)");
  auto* corrupt = app.add_subcommand("corrupt", "Test-time corruption of the dominant modality");
  add_common(corrupt, true, false);
  corrupt->add_option("--dominant", dominant, "Modality to corrupt (default from config)");
  auto* theory = app.add_subcommand("theory", "Numerical checks of the SNR and gradient-flow results");
  theory->add_option("--seed", common.seed, "Seed for random parameter draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  setup_logging();
  try {
    if (*gen) return cmd_gen(common);
    if (*tr) return cmd_train(common);
    if (*sweep) return cmd_sweep(common, scales, kinds);
    if (*grads) return cmd_grads(common, epochs);
    if (*corrupt) return cmd_corrupt(common, dominant);
    if (*theory) return cmd_theory(common);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kIo;
  } catch (const NumericError& e) {
    spdlog::error("{}", e.what());
    return kNumeric;
  } catch (const ValueError& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kInternal;
  }
  return kInternal;
}
