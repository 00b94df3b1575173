#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "magsim/aggregation.hpp"
#include "magsim/graph.hpp"
#include "magsim/supra.hpp"

namespace magsim {

enum class ModelKind { TextMlp, VisualMlp, EfMlp, GcnJoint, SageConcat, IndepAgg, Supra };

struct TrainConfig {
  ModelKind kind = ModelKind::Supra;
  SupraVariant variant = SupraVariant::Full;
  double lambda_aux = 0.7;
  bool detach_synergy = false;
  double lr = 0.01;
  std::size_t max_epochs = 300;
  std::size_t patience = 40;
  std::uint64_t seed = 0;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  double alpha = 0.5;
  double dropout = 0.3;
  double smoothing = 0.1;
  double weight_decay = 1e-4;

  void validate() const;
};

/// Labels used in configs and CSV output: text-mlp, visual-mlp, ef-mlp,
/// gcn-joint, sage-concat, indep-agg, supra, supra-base, supra-synergy-only,
/// supra-detached.
TrainConfig apply_kind_label(TrainConfig base, std::string_view label);
std::string kind_label(const TrainConfig& cfg);
std::vector<std::string> known_kind_labels();

struct ModelOutput {
  Tensor logits;
  std::vector<Tensor> aux_logits;  // per-modality heads trained by the auxiliary loss
};

using Branch = std::pair<std::string, std::vector<Parameter*>>;

class Model {
 public:
  virtual ~Model() = default;
  virtual ModelOutput forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::vector<Parameter*> trainable_parameters() { return parameters(); }
  /// Named parameter groups whose gradient norms are tracked.
  virtual std::vector<Branch> branches() = 0;
  virtual double lambda_aux() const { return 0.0; }

  std::size_t parameter_count();
};

/// Builds the model for cfg.kind sized to `mag`. Text/visual MLPs read the
/// first and second modality.
std::unique_ptr<Model> make_model(const TrainConfig& cfg, const Mag& mag);

/// Concrete SUPRA wrapper, exposed for diagnostics that need the streams.
class SupraNet : public Model {
 public:
  SupraNet(const Mag& mag, const TrainConfig& cfg);

  ModelOutput forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj) override;
  std::vector<Parameter*> parameters() override { return model_.parameters(); }
  std::vector<Parameter*> trainable_parameters() override;
  std::vector<Branch> branches() override;
  double lambda_aux() const override { return model_.config().effective_lambda(); }
  SupraModel& model() { return model_; }

 private:
  SupraModel model_;
};

}  // namespace magsim
