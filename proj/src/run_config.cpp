#include "magsim/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "magsim/errors.hpp"

namespace magsim {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

const char* variant_name(SupraVariant v) {
  switch (v) {
    case SupraVariant::Full: return "full";
    case SupraVariant::SynergyOnly: return "synergy-only";
    case SupraVariant::Base: return "base";
  }
  return "full";
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + child(key) + "' has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + child(it.key().c_str()) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ModalitySpec parse_modality(const json& j, const std::string& path) {
  ModalitySpec m;
  Reader r(j, path);
  r.get("name", m.name);
  r.get("dim", m.dim);
  r.get("signal_norm", m.signal_norm);
  r.get("noise_var", m.noise_var);
  r.finish();
  if (m.name.empty()) throw ConfigError("config key '" + path + ".name' is required");
  return m;
}

SyntheticSpec parse_synthetic(const json& j) {
  SyntheticSpec s;
  Reader r(j, "synthetic");
  r.get("num_nodes", s.num_nodes);
  r.get("num_classes", s.num_classes);
  if (const json* mods = r.sub("modalities")) {
    if (!mods->is_array()) throw ConfigError("config key 'synthetic.modalities' must be an array");
    s.modalities.clear();
    for (std::size_t i = 0; i < mods->size(); ++i) {
      s.modalities.push_back(parse_modality((*mods)[i], "synthetic.modalities[" + std::to_string(i) + "]"));
    }
  }
  r.get("homophily", s.homophily);
  r.get("mean_degree", s.mean_degree);
  r.get("train_frac", s.train_frac);
  r.get("val_frac", s.val_frac);
  r.get("seed", s.seed);
  r.finish();
  return s;
}

TrainConfig parse_train(const json& j) {
  TrainConfig c;
  Reader r(j, "train");
  std::string kind = kind_label(c);
  r.get("kind", kind);
  try {
    c = apply_kind_label(c, kind);
  } catch (const ValueError& e) {
    throw ConfigError(std::string("config key 'train.kind': ") + e.what());
  }
  // Echoed by to_json; accepted so an echoed config loads back, but must
  // agree with the kind.
  std::string variant = variant_name(c.variant);
  bool detach = c.detach_synergy;
  r.get("variant", variant);
  r.get("detach_synergy", detach);
  if (variant != variant_name(c.variant) || detach != c.detach_synergy) {
    throw ConfigError("config keys 'train.variant'/'train.detach_synergy' disagree with train.kind '" + kind + "'");
  }
  r.get("lambda_aux", c.lambda_aux);
  r.get("lr", c.lr);
  r.get("max_epochs", c.max_epochs);
  r.get("patience", c.patience);
  r.get("seed", c.seed);
  r.get("hidden", c.hidden);
  r.get("layers", c.layers);
  r.get("alpha", c.alpha);
  r.get("dropout", c.dropout);
  r.get("smoothing", c.smoothing);
  r.get("weight_decay", c.weight_decay);
  r.finish();
  try {
    c.validate();
  } catch (const ValueError& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  return c;
}

ExperimentConfig parse_experiments(const json& j) {
  ExperimentConfig e;
  Reader r(j, "experiments");
  r.get("scales", e.scales);
  r.get("sweep_kinds", e.sweep_kinds);
  r.get("grad_variants", e.grad_variants);
  r.get("probe_kinds", e.probe_kinds);
  r.get("grad_epochs", e.grad_epochs);
  r.get("num_seeds", e.num_seeds);
  r.get("dominant_modality", e.dominant_modality);
  r.get("weak_modality", e.weak_modality);
  r.finish();
  for (const auto* list : {&e.sweep_kinds, &e.grad_variants, &e.probe_kinds}) {
    for (const auto& k : *list) {
      try {
        apply_kind_label(TrainConfig{}, k);
      } catch (const ValueError& err) {
        throw ConfigError(std::string("experiments: ") + err.what());
      }
    }
  }
  return e;
}

}  // namespace

ojson to_json(const SyntheticSpec& s) {
  ojson j;
  j["num_nodes"] = s.num_nodes;
  j["num_classes"] = s.num_classes;
  j["modalities"] = ojson::array();
  for (const auto& m : s.modalities) {
    j["modalities"].push_back({{"name", m.name}, {"dim", m.dim}, {"signal_norm", m.signal_norm}, {"noise_var", m.noise_var}});
  }
  j["homophily"] = s.homophily;
  j["mean_degree"] = s.mean_degree;
  j["train_frac"] = s.train_frac;
  j["val_frac"] = s.val_frac;
  j["seed"] = s.seed;
  return j;
}

ojson to_json(const TrainConfig& c) {
  ojson j;
  j["kind"] = kind_label(c);
  j["variant"] = variant_name(c.variant);
  j["lambda_aux"] = c.lambda_aux;
  j["detach_synergy"] = c.detach_synergy;
  j["lr"] = c.lr;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["alpha"] = c.alpha;
  j["dropout"] = c.dropout;
  j["smoothing"] = c.smoothing;
  j["weight_decay"] = c.weight_decay;
  return j;
}

ojson to_json(const ExperimentConfig& e) {
  ojson j;
  j["scales"] = e.scales;
  j["sweep_kinds"] = e.sweep_kinds;
  j["grad_variants"] = e.grad_variants;
  j["probe_kinds"] = e.probe_kinds;
  j["grad_epochs"] = e.grad_epochs;
  j["num_seeds"] = e.num_seeds;
  j["dominant_modality"] = e.dominant_modality;
  j["weak_modality"] = e.weak_modality;
  return j;
}

ojson to_json(const RunConfig& r) {
  ojson j;
  j["synthetic"] = to_json(r.synthetic);
  j["train"] = to_json(r.train);
  j["experiments"] = to_json(r.experiments);
  return j;
}

RunConfig parse_run_config(const json& j) {
  RunConfig rc;
  Reader r(j, "");
  if (const json* s = r.sub("synthetic")) rc.synthetic = parse_synthetic(*s);
  if (const json* t = r.sub("train")) rc.train = parse_train(*t);
  if (const json* e = r.sub("experiments")) rc.experiments = parse_experiments(*e);
  r.finish();
  return rc;
}

RunConfig parse_run_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str());
}

}  // namespace magsim
