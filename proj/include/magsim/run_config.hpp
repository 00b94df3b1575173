#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "magsim/graph.hpp"
#include "magsim/models.hpp"

namespace magsim {

/// Experiment selections shared by the sweep, gradient and probe commands.
struct ExperimentConfig {
  std::vector<double> scales{0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<std::string> sweep_kinds{"ef-mlp", "gcn-joint", "supra-base"};
  std::vector<std::string> grad_variants{"supra", "supra-base", "supra-synergy-only", "supra-detached", "indep-agg"};
  std::vector<std::string> probe_kinds{"supra-base", "supra"};
  std::size_t grad_epochs = 100;
  std::size_t num_seeds = 3;
  std::string dominant_modality = "text";
  std::string weak_modality = "visual";
};

struct RunConfig {
  SyntheticSpec synthetic;
  TrainConfig train;
  ExperimentConfig experiments;
};

// Every field is optional; missing keys keep the defaults above. Unknown keys
// raise ConfigError naming the full key path.

nlohmann::ordered_json to_json(const SyntheticSpec& s);
nlohmann::ordered_json to_json(const TrainConfig& c);
nlohmann::ordered_json to_json(const ExperimentConfig& e);
nlohmann::ordered_json to_json(const RunConfig& r);

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig parse_run_config_text(const std::string& text);
/// ConfigError on malformed content, IoError if the file cannot be read.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace magsim
