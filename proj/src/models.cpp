#include "magsim/models.hpp"

#include <algorithm>

#include "magsim/errors.hpp"
#include "magsim/seed.hpp"

namespace magsim {

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ValueError("lr must be nonnegative");
  if (patience < 1) throw ValueError("patience must be >= 1");
  if (max_epochs < 1) throw ValueError("max_epochs must be >= 1");
  if (hidden < 1) throw ValueError("hidden must be >= 1");
  if (layers < 1) throw ValueError("layers must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValueError("alpha must lie in (0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValueError("dropout must lie in [0, 1)");
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ValueError("smoothing must lie in [0, 1)");
  if (lambda_aux < 0.0) throw ValueError("lambda_aux must be nonnegative");
  if (weight_decay < 0.0) throw ValueError("weight_decay must be nonnegative");
}

namespace {

struct KindEntry {
  const char* label;
  ModelKind kind;
  SupraVariant variant;
  bool detach;
};

constexpr KindEntry kKinds[] = {
    {"text-mlp", ModelKind::TextMlp, SupraVariant::Full, false},
    {"visual-mlp", ModelKind::VisualMlp, SupraVariant::Full, false},
    {"ef-mlp", ModelKind::EfMlp, SupraVariant::Full, false},
    {"gcn-joint", ModelKind::GcnJoint, SupraVariant::Full, false},
    {"sage-concat", ModelKind::SageConcat, SupraVariant::Full, false},
    {"indep-agg", ModelKind::IndepAgg, SupraVariant::Full, false},
    {"supra", ModelKind::Supra, SupraVariant::Full, false},
    {"supra-base", ModelKind::Supra, SupraVariant::Base, false},
    {"supra-synergy-only", ModelKind::Supra, SupraVariant::SynergyOnly, false},
    {"supra-detached", ModelKind::Supra, SupraVariant::Full, true},
};

std::vector<std::size_t> dims_of(const Mag& mag) {
  std::vector<std::size_t> d;
  for (const auto& m : mag.modalities) d.push_back(m.dim);
  return d;
}

void append(std::vector<Parameter*>& dst, const std::vector<Parameter*>& src) { dst.insert(dst.end(), src.begin(), src.end()); }

/// Two-layer perceptron over a subset of modalities.
class MlpNet : public Model {
 public:
  MlpNet(const Mag& mag, std::vector<std::size_t> modalities, const TrainConfig& cfg) : modalities_(std::move(modalities)) {
    std::size_t in = 0;
    for (std::size_t m : modalities_) in += mag.modalities.at(m).dim;
    branch_name_ = modalities_.size() == 1 ? mag.modalities[modalities_[0]].name : "input";
    std::mt19937_64 rng(derive_seed(cfg.seed, "init"));
    hidden_ = Linear("mlp.hidden", in, cfg.hidden, rng);
    out_ = Linear("mlp.out", cfg.hidden, mag.num_classes, rng);
  }

  ModelOutput forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix&) override {
    std::vector<Tensor> parts;
    for (std::size_t m : modalities_) parts.push_back(features.at(m));
    Tensor x = parts.size() == 1 ? parts[0] : concat_cols(std::span<const Tensor>(parts));
    Tensor h = ctx.drop(relu(hidden_.forward(ctx, x)));
    return {out_.forward(ctx, h), {}};
  }

  std::vector<Parameter*> parameters() override {
    auto p = hidden_.parameters();
    append(p, out_.parameters());
    return p;
  }

  std::vector<Branch> branches() override { return {{branch_name_, hidden_.parameters()}, {"head", out_.parameters()}}; }

 private:
  std::vector<std::size_t> modalities_;
  std::string branch_name_;
  Linear hidden_;
  Linear out_;
};

class JointNet : public Model {
 public:
  JointNet(const Mag& mag, const TrainConfig& cfg, StackVariant variant)
      : model_(make(mag, cfg, variant)) {}

  ModelOutput forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj) override {
    return {joint_forward(ctx, features, adj, model_), {}};
  }
  std::vector<Parameter*> parameters() override { return model_.parameters(); }
  std::vector<Branch> branches() override {
    return {{"projector", model_.projector.parameters()}, {"gnn", model_.stack.parameters()}};
  }

 private:
  static JointModel make(const Mag& mag, const TrainConfig& cfg, StackVariant variant) {
    std::mt19937_64 rng(derive_seed(cfg.seed, "init"));
    StackOptions opts{variant, cfg.layers, cfg.alpha, true, true};
    return JointModel(dims_of(mag), opts, cfg.hidden, mag.num_classes, rng);
  }
  JointModel model_;
};

class IndepNet : public Model {
 public:
  IndepNet(const Mag& mag, const TrainConfig& cfg) : model_(make(mag, cfg)) {
    for (const auto& m : mag.modalities) names_.push_back(m.name);
  }

  ModelOutput forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj) override {
    return {independent_forward(ctx, features, adj, model_), {}};
  }
  std::vector<Parameter*> parameters() override { return model_.parameters(); }
  std::vector<Branch> branches() override {
    std::vector<Branch> out;
    for (std::size_t m = 0; m < names_.size(); ++m) out.emplace_back(names_[m], model_.projectors[m].parameters());
    for (std::size_t m = 0; m < names_.size(); ++m) out.emplace_back("gnn:" + names_[m], model_.stacks[m].parameters());
    return out;
  }

 private:
  static IndependentModel make(const Mag& mag, const TrainConfig& cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, "init"));
    StackOptions opts{StackVariant::MeanMix, cfg.layers, cfg.alpha, true, true};
    return IndependentModel(dims_of(mag), opts, cfg.hidden, mag.num_classes, rng);
  }
  std::vector<std::string> names_;
  IndependentModel model_;
};

std::vector<std::string> names_of(const Mag& mag) {
  std::vector<std::string> n;
  for (const auto& m : mag.modalities) n.push_back(m.name);
  return n;
}

SupraConfig supra_config(const TrainConfig& cfg) {
  SupraConfig sc;
  sc.proj_dim = cfg.hidden;
  sc.hidden_dim = cfg.hidden;
  sc.synergy = StackOptions{StackVariant::MeanMix, cfg.layers, cfg.alpha, true, true};
  sc.lambda_aux = cfg.lambda_aux;
  sc.dropout = cfg.dropout;
  sc.label_smoothing = cfg.smoothing;
  sc.variant = cfg.variant;
  sc.detach_synergy = cfg.detach_synergy;
  return sc;
}

}  // namespace

TrainConfig apply_kind_label(TrainConfig base, std::string_view label) {
  for (const auto& e : kKinds) {
    if (label == e.label) {
      base.kind = e.kind;
      base.variant = e.variant;
      base.detach_synergy = e.detach;
      return base;
    }
  }
  throw ValueError("unknown model kind '" + std::string(label) + "'");
}

std::string kind_label(const TrainConfig& cfg) {
  for (const auto& e : kKinds) {
    if (cfg.kind != e.kind) continue;
    if (cfg.kind != ModelKind::Supra) return e.label;
    if (cfg.variant == e.variant && cfg.detach_synergy == e.detach) return e.label;
  }
  return "supra";
}

std::vector<std::string> known_kind_labels() {
  std::vector<std::string> out;
  for (const auto& e : kKinds) out.emplace_back(e.label);
  return out;
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters()) n += p->value.size();
  return n;
}

SupraNet::SupraNet(const Mag& mag, const TrainConfig& cfg)
    : model_(names_of(mag), dims_of(mag), mag.num_classes, supra_config(cfg), derive_seed(cfg.seed, "init")) {}

ModelOutput SupraNet::forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj) {
  SupraOutputs out = model_.forward(ctx, features, adj);
  return {out.y_final, std::move(out.unique_logits)};
}

std::vector<Parameter*> SupraNet::trainable_parameters() {
  if (!model_.config().detach_synergy) return parameters();
  auto frozen = model_.synergy().parameters();
  std::vector<Parameter*> out;
  for (Parameter* p : parameters()) {
    if (std::find(frozen.begin(), frozen.end(), p) == frozen.end()) out.push_back(p);
  }
  return out;
}

std::vector<Branch> SupraNet::branches() {
  std::vector<Branch> out;
  for (std::size_t m = 0; m < model_.num_modalities(); ++m) {
    out.emplace_back(model_.modality_names()[m], model_.projector_parameters(m));
  }
  out.emplace_back("synergy", model_.synergy().parameters());
  return out;
}

std::unique_ptr<Model> make_model(const TrainConfig& cfg, const Mag& mag) {
  cfg.validate();
  switch (cfg.kind) {
    case ModelKind::TextMlp:
      return std::make_unique<MlpNet>(mag, std::vector<std::size_t>{0}, cfg);
    case ModelKind::VisualMlp:
      if (mag.modalities.size() < 2) throw ValueError("visual-mlp needs a second modality");
      return std::make_unique<MlpNet>(mag, std::vector<std::size_t>{1}, cfg);
    case ModelKind::EfMlp: {
      std::vector<std::size_t> all(mag.modalities.size());
      for (std::size_t m = 0; m < all.size(); ++m) all[m] = m;
      return std::make_unique<MlpNet>(mag, all, cfg);
    }
    case ModelKind::GcnJoint:
      return std::make_unique<JointNet>(mag, cfg, StackVariant::MeanMix);
    case ModelKind::SageConcat:
      return std::make_unique<JointNet>(mag, cfg, StackVariant::EgoConcat);
    case ModelKind::IndepAgg:
      return std::make_unique<IndepNet>(mag, cfg);
    case ModelKind::Supra:
      return std::make_unique<SupraNet>(mag, cfg);
  }
  throw ValueError("unhandled model kind");
}

}  // namespace magsim
