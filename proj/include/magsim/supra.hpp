#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "magsim/aggregation.hpp"

namespace magsim {

enum class SupraVariant {
  Full,         // unique + synergy streams, auxiliary supervision with lambda_aux
  SynergyOnly,  // prediction from the synergy head alone, no auxiliary loss
  Base,         // Full with lambda_aux = 0
};

struct SupraConfig {
  std::size_t proj_dim = 64;    // output width of each modality projector
  std::size_t hidden_dim = 64;  // synergy stack width
  StackOptions synergy{StackVariant::MeanMix, 2, 0.5, true, true};
  double lambda_aux = 0.7;
  double dropout = 0.3;
  double label_smoothing = 0.1;
  SupraVariant variant = SupraVariant::Full;
  /// Control: synergy stack frozen and fed detached inputs, so neither the
  /// stack nor the projectors receive gradient through it.
  bool detach_synergy = false;

  /// lambda_aux after applying the variant's rules.
  double effective_lambda() const;
};

struct SupraOutputs {
  std::vector<Tensor> z_unique;       // per modality, N x proj_dim
  std::vector<Tensor> unique_logits;  // per modality, empty for SynergyOnly
  Tensor z_synergy;                   // N x hidden_dim
  Tensor synergy_logits;
  Tensor y_final;
};

struct SupraLoss {
  Tensor total;
  double task = 0.0;
  std::vector<double> aux;  // per modality, empty when no auxiliary term
};

/// Decoupled dual-pathway model: per-modality projectors f_m feed both a
/// linear head each (unique streams) and, concatenated, one shared GNN
/// (synergy stream). The final prediction averages all |M| + 1 heads.
class SupraModel {
 public:
  SupraModel(std::vector<std::string> modality_names, const std::vector<std::size_t>& modality_dims,
             std::size_t num_classes, const SupraConfig& config, std::uint64_t seed);

  SupraOutputs forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj);

  /// L_task + lambda * sum_m L_aux^(m) on the given rows.
  SupraLoss loss(const SupraOutputs& out, std::span<const std::size_t> rows, std::span<const std::size_t> labels,
                 double lambda_aux, double smoothing) const;

  /// L2 norm of each projector's gradient (keyed by modality name) and of
  /// the synergy stack's gradient (key "synergy").
  std::vector<std::pair<std::string, double>> branch_grad_norms();

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> projector_parameters(std::size_t m) { return projectors_[m].parameters(); }
  std::size_t synergy_input_width() const { return synergy_.in_dim(); }
  std::size_t synergy_parameter_count() const;
  std::size_t parameter_count();
  const SupraConfig& config() const { return config_; }
  std::size_t num_modalities() const { return projectors_.size(); }
  const std::vector<std::string>& modality_names() const { return names_; }

  Projector& projector(std::size_t m) { return projectors_[m]; }
  Linear& head(std::size_t m) { return heads_[m]; }
  GnnStack& synergy() { return synergy_; }
  Linear& synergy_head() { return synergy_head_; }

 private:
  std::vector<std::string> names_;
  SupraConfig config_;
  std::vector<Projector> projectors_;
  std::vector<Linear> heads_;
  GnnStack synergy_;
  Linear synergy_head_;
};

/// Euclidean norm of the concatenated gradients.
double grad_norm(std::span<Parameter* const> params);

}  // namespace magsim
