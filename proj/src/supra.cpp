#include "magsim/supra.hpp"

#include <cmath>

#include "magsim/errors.hpp"
#include "magsim/seed.hpp"

namespace magsim {

double SupraConfig::effective_lambda() const {
  if (variant == SupraVariant::Full) return lambda_aux;
  return 0.0;
}

SupraModel::SupraModel(std::vector<std::string> modality_names, const std::vector<std::size_t>& modality_dims,
                       std::size_t num_classes, const SupraConfig& config, std::uint64_t seed)
    : names_(std::move(modality_names)), config_(config) {
  if (names_.size() != modality_dims.size() || names_.empty()) {
    throw DimensionError("supra: need one name per modality dimension");
  }
  if (config.lambda_aux < 0.0) throw ValueError("lambda_aux must be nonnegative");
  // Each component draws from its own stream so that changing one part of
  // the architecture (e.g. synergy depth) leaves the others' init intact.
  for (std::size_t m = 0; m < modality_dims.size(); ++m) {
    std::mt19937_64 rng(derive_seed(seed, "supra.proj:" + names_[m]));
    projectors_.emplace_back("supra.proj." + names_[m], modality_dims[m], config.proj_dim, rng);
    std::mt19937_64 head_rng(derive_seed(seed, "supra.head:" + names_[m]));
    heads_.emplace_back("supra.head." + names_[m], config.proj_dim, num_classes, head_rng);
  }
  std::mt19937_64 syn_rng(derive_seed(seed, "supra.synergy"));
  synergy_ = GnnStack("supra.synergy", config.synergy, config.proj_dim * modality_dims.size(), config.hidden_dim, syn_rng);
  std::mt19937_64 hs_rng(derive_seed(seed, "supra.head_s"));
  synergy_head_ = Linear("supra.head_s", synergy_.out_dim(), num_classes, hs_rng);
  synergy_.frozen = config.detach_synergy;
}

SupraOutputs SupraModel::forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj) {
  if (features.size() != projectors_.size()) {
    throw DimensionError("supra: expected " + std::to_string(projectors_.size()) + " modalities, got " +
                         std::to_string(features.size()));
  }
  SupraOutputs out;
  for (std::size_t m = 0; m < features.size(); ++m) {
    if (features[m].cols() != projectors_[m].in_dim()) {
      throw DimensionError("supra: modality '" + names_[m] + "' has width " + std::to_string(features[m].cols()) +
                           ", projector expects " + std::to_string(projectors_[m].in_dim()));
    }
    out.z_unique.push_back(ctx.drop(projectors_[m].forward(ctx, features[m])));
  }

  Tensor h_s = out.z_unique.size() == 1 ? out.z_unique[0] : concat_cols(std::span<const Tensor>(out.z_unique));
  if (config_.detach_synergy) h_s = detach(h_s);
  out.z_synergy = synergy_.forward(ctx, adj, h_s);
  out.synergy_logits = synergy_head_.forward(ctx, out.z_synergy);

  if (config_.variant == SupraVariant::SynergyOnly) {
    out.y_final = out.synergy_logits;
    return out;
  }
  Tensor pooled = out.synergy_logits;
  for (std::size_t m = 0; m < features.size(); ++m) {
    out.unique_logits.push_back(heads_[m].forward(ctx, out.z_unique[m]));
    pooled = add(pooled, out.unique_logits.back());
  }
  out.y_final = scale(pooled, 1.0 / static_cast<double>(features.size() + 1));
  return out;
}

SupraLoss SupraModel::loss(const SupraOutputs& out, std::span<const std::size_t> rows,
                           std::span<const std::size_t> labels, double lambda_aux, double smoothing) const {
  if (lambda_aux < 0.0) throw ValueError("lambda_aux must be nonnegative, got " + std::to_string(lambda_aux));
  SupraLoss result;
  Tensor task = cross_entropy_smoothed(row_select(out.y_final, rows), labels, smoothing);
  result.task = task.item();
  result.total = task;
  if (lambda_aux == 0.0 || out.unique_logits.empty()) return result;
  Tensor aux_sum;
  for (std::size_t m = 0; m < out.unique_logits.size(); ++m) {
    Tensor aux = cross_entropy_smoothed(row_select(out.unique_logits[m], rows), labels, smoothing);
    result.aux.push_back(aux.item());
    aux_sum = m == 0 ? aux : add(aux_sum, aux);
  }
  result.total = add(task, scale(aux_sum, lambda_aux));
  return result;
}

double grad_norm(std::span<Parameter* const> params) {
  double acc = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.data) acc += g * g;
  }
  return std::sqrt(acc);
}

std::vector<std::pair<std::string, double>> SupraModel::branch_grad_norms() {
  bool any = false;
  for (Parameter* p : parameters()) any = any || p->has_grad;
  if (!any) throw ContractError("branch_grad_norms: no backward pass since the last zero_grad");
  std::vector<std::pair<std::string, double>> norms;
  for (std::size_t m = 0; m < projectors_.size(); ++m) {
    auto params = projectors_[m].parameters();
    norms.emplace_back(names_[m], grad_norm(params));
  }
  auto syn = synergy_.parameters();
  norms.emplace_back("synergy", grad_norm(syn));
  return norms;
}

std::vector<Parameter*> SupraModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : projectors_) {
    for (Parameter* q : p.parameters()) out.push_back(q);
  }
  for (auto& h : heads_) {
    for (Parameter* q : h.parameters()) out.push_back(q);
  }
  for (Parameter* q : synergy_.parameters()) out.push_back(q);
  for (Parameter* q : synergy_head_.parameters()) out.push_back(q);
  return out;
}

std::size_t SupraModel::synergy_parameter_count() const {
  return synergy_.parameter_count() + synergy_head_.parameter_count();
}

std::size_t SupraModel::parameter_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters()) n += p->value.size();
  return n;
}

}  // namespace magsim
