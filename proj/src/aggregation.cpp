#include "magsim/aggregation.hpp"

#include <cmath>

#include "magsim/errors.hpp"

namespace magsim {

Tensor ForwardContext::bind(Parameter& p, bool frozen) const {
  if (tape == nullptr || frozen) return Tensor(p.value);
  return tape->parameter(p);
}

Tensor ForwardContext::drop(const Tensor& x) const {
  if (!training || dropout == 0.0) return x;
  if (rng == nullptr) throw ContractError("dropout in training mode needs an rng");
  return magsim::dropout(x, dropout, training, *rng);
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng, bool bias) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> unif(-limit, limit);
  Matrix w(in, out);
  for (double& v : w.data) v = unif(rng);
  weight_ = Parameter(name + ".weight", std::move(w));
  if (bias) bias_ = Parameter(name + ".bias", Matrix(1, out));
}

Tensor Linear::forward(const ForwardContext& ctx, const Tensor& x) {
  if (x.cols() != in_dim()) {
    throw DimensionError(weight_.name + ": input " + x.value().shape_string() + " vs weight " +
                         weight_.value.shape_string());
  }
  Tensor y = matmul(x, ctx.bind(weight_, frozen));
  if (bias_) y = add_row(y, ctx.bind(*bias_, frozen));
  return y;
}

std::vector<Parameter*> Linear::parameters() {
  std::vector<Parameter*> out{&weight_};
  if (bias_) out.push_back(&*bias_);
  return out;
}

std::size_t Linear::parameter_count() const {
  return weight_.value.size() + (bias_ ? bias_->value.size() : 0);
}

Tensor mean_aggregate(const Tensor& h, const CsrMatrix& adj, double alpha) {
  if (adj.num_rows() != h.rows()) {
    throw DimensionError("mean_aggregate: adjacency has " + std::to_string(adj.num_rows()) + " rows, features " +
                         h.value().shape_string());
  }
  return add(scale(h, alpha), scale(spmm(adj, h), 1.0 - alpha));
}

MeanAggLayer::MeanAggLayer(double alpha, std::optional<Linear> weight) : alpha_(alpha), weight_(std::move(weight)) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValueError("self-retention alpha must lie strictly inside (0, 1), got " + std::to_string(alpha));
  }
}

GnnStack::GnnStack(const std::string& name, const StackOptions& opts, std::size_t in_dim, std::size_t hidden_dim,
                   std::mt19937_64& rng)
    : opts_(opts), in_dim_(in_dim) {
  if (opts.layers < 1) throw ValueError("a GNN stack needs at least one layer");
  std::size_t width = in_dim;
  for (std::size_t l = 0; l < opts.layers; ++l) {
    std::optional<Linear> w;
    const std::size_t mixed = opts.variant == StackVariant::EgoConcat ? 2 * width : width;
    if (opts.weights) {
      w.emplace(name + ".layer" + std::to_string(l), mixed, hidden_dim, rng);
      width = hidden_dim;
    } else {
      width = mixed;
    }
    // Ego-concat ignores alpha, but the layer still validates it.
    layers_.emplace_back(opts.alpha, std::move(w));
  }
  out_dim_ = width;
}

Tensor GnnStack::forward(const ForwardContext& ctx, const CsrMatrix& adj, const Tensor& h) {
  if (h.cols() != in_dim_) {
    throw DimensionError("gnn stack expects width " + std::to_string(in_dim_) + ", got " + h.value().shape_string());
  }
  Tensor x = h;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    MeanAggLayer& layer = layers_[l];
    if (opts_.variant == StackVariant::MeanMix) {
      x = mean_aggregate(x, adj, layer.alpha());
    } else {
      x = concat_cols(x, spmm(adj, x));
    }
    if (layer.weight()) {
      layer.weight()->frozen = frozen;
      x = layer.weight()->forward(ctx, x);
    }
    if (l + 1 < layers_.size() && opts_.activation) {
      x = ctx.drop(relu(x));
    }
  }
  return x;
}

std::vector<Parameter*> GnnStack::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    if (!layer.weight()) continue;
    for (Parameter* p : layer.weight()->parameters()) out.push_back(p);
  }
  return out;
}

std::size_t GnnStack::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    if (layer.weight()) n += layer.weight()->parameter_count();
  }
  return n;
}

namespace {

std::size_t total_dim(const std::vector<std::size_t>& dims) {
  std::size_t d = 0;
  for (std::size_t x : dims) d += x;
  return d;
}

void check_features(const std::vector<Tensor>& features, std::size_t expected) {
  if (features.size() != expected) {
    throw DimensionError("expected " + std::to_string(expected) + " modality feature matrices, got " +
                         std::to_string(features.size()));
  }
}

}  // namespace

JointModel::JointModel(const std::vector<std::size_t>& modality_dims, const StackOptions& opts, std::size_t hidden,
                       std::size_t classes, std::mt19937_64& rng)
    : projector("joint.proj", total_dim(modality_dims), hidden, rng),
      stack("joint.gnn", opts, hidden, hidden, rng),
      head("joint.head", stack.out_dim(), classes, rng) {}

std::vector<Parameter*> JointModel::parameters() {
  std::vector<Parameter*> out = projector.parameters();
  for (Parameter* p : stack.parameters()) out.push_back(p);
  for (Parameter* p : head.parameters()) out.push_back(p);
  return out;
}

Tensor joint_forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj,
                     JointModel& model) {
  if (features.empty()) throw DimensionError("joint_forward: no modalities");
  Tensor x = features.size() == 1 ? features[0] : concat_cols(std::span<const Tensor>(features));
  if (x.cols() != model.projector.in_dim()) {
    throw DimensionError("joint_forward: concatenated width " + std::to_string(x.cols()) + " but projector expects " +
                         std::to_string(model.projector.in_dim()));
  }
  Tensor z = ctx.drop(model.projector.forward(ctx, x));
  z = model.stack.forward(ctx, adj, z);
  return model.head.forward(ctx, z);
}

IndependentModel::IndependentModel(const std::vector<std::size_t>& modality_dims, const StackOptions& opts,
                                   std::size_t hidden, std::size_t classes, std::mt19937_64& rng) {
  for (std::size_t m = 0; m < modality_dims.size(); ++m) {
    projectors.emplace_back("indep.proj" + std::to_string(m), modality_dims[m], hidden, rng);
    stacks.emplace_back("indep.gnn" + std::to_string(m), opts, hidden, hidden, rng);
  }
  std::size_t fused = 0;
  for (const auto& s : stacks) fused += s.out_dim();
  head = Linear("indep.head", fused, classes, rng);
}

std::vector<Parameter*> IndependentModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : projectors) {
    for (Parameter* q : p.parameters()) out.push_back(q);
  }
  for (auto& s : stacks) {
    for (Parameter* q : s.parameters()) out.push_back(q);
  }
  for (Parameter* q : head.parameters()) out.push_back(q);
  return out;
}

Tensor independent_forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj,
                           IndependentModel& model) {
  check_features(features, model.stacks.size());
  std::vector<Tensor> branches;
  for (std::size_t m = 0; m < features.size(); ++m) {
    Tensor z = ctx.drop(model.projectors[m].forward(ctx, features[m]));
    branches.push_back(model.stacks[m].forward(ctx, adj, z));
  }
  Tensor fused = branches.size() == 1 ? branches[0] : concat_cols(std::span<const Tensor>(branches));
  return model.head.forward(ctx, fused);
}

double ego_jacobian_diag(const CsrMatrix& adj, double alpha, std::size_t layers, std::size_t node) {
  if (!adj.normalized()) throw ContractError("ego_jacobian_diag: adjacency must be row-mean normalized");
  if (node >= adj.num_rows()) {
    throw ValueError("ego_jacobian_diag: node " + std::to_string(node) + " out of range [0, " +
                     std::to_string(adj.num_rows()) + ")");
  }
  std::vector<double> x(adj.num_rows(), 0.0);
  x[node] = 1.0;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<double> ax = adj.multiply(x);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = alpha * x[i] + (1.0 - alpha) * ax[i];
  }
  return x[node];
}

}  // namespace magsim
