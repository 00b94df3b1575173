#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "magsim/csr.hpp"
#include "magsim/tensor.hpp"

namespace magsim {

/// Per-call forward state. A null tape evaluates on constants.
struct ForwardContext {
  Tape* tape = nullptr;
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  /// Binds a parameter as a tape leaf, or as a constant when there is no
  /// tape or the owner is frozen.
  Tensor bind(Parameter& p, bool frozen = false) const;
  Tensor drop(const Tensor& x) const;
};

/// x W + b with Glorot-uniform init.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng, bool bias = true);

  Tensor forward(const ForwardContext& ctx, const Tensor& x);
  std::vector<Parameter*> parameters();
  std::size_t in_dim() const { return weight_.value.rows; }
  std::size_t out_dim() const { return weight_.value.cols; }
  std::size_t parameter_count() const;

  Parameter& weight() { return weight_; }
  std::optional<Parameter>& bias() { return bias_; }
  bool frozen = false;

 private:
  Parameter weight_;
  std::optional<Parameter> bias_;
};

/// Single-layer perceptron with ReLU: relu(x W + b).
class Projector {
 public:
  Projector() = default;
  Projector(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng)
      : linear_(name, in, out, rng) {}

  Tensor forward(const ForwardContext& ctx, const Tensor& x) { return relu(linear_.forward(ctx, x)); }
  std::vector<Parameter*> parameters() { return linear_.parameters(); }
  std::size_t in_dim() const { return linear_.in_dim(); }
  std::size_t out_dim() const { return linear_.out_dim(); }
  Linear& linear() { return linear_; }

 private:
  Linear linear_;
};

/// alpha * h + (1 - alpha) * mean over neighbors of h.
Tensor mean_aggregate(const Tensor& h, const CsrMatrix& adj, double alpha);

/// One propagation step: self-retaining neighbor mean followed by an
/// optional linear transform.
class MeanAggLayer {
 public:
  explicit MeanAggLayer(double alpha, std::optional<Linear> weight = std::nullopt);

  double alpha() const { return alpha_; }
  std::optional<Linear>& weight() { return weight_; }
  const std::optional<Linear>& weight() const { return weight_; }

 private:
  double alpha_;
  std::optional<Linear> weight_;
};

enum class StackVariant {
  MeanMix,    // alpha * h + (1 - alpha) * neighbor mean
  EgoConcat,  // [h || neighbor mean], doubles the pre-transform width
};

struct StackOptions {
  StackVariant variant = StackVariant::MeanMix;
  std::size_t layers = 2;
  double alpha = 0.5;
  bool weights = true;     // false: pure propagation, no parameters
  bool activation = true;  // ReLU between layers (never after the last)
};

/// L propagation layers over a normalized adjacency.
class GnnStack {
 public:
  GnnStack() = default;
  GnnStack(const std::string& name, const StackOptions& opts, std::size_t in_dim, std::size_t hidden_dim,
           std::mt19937_64& rng);

  Tensor forward(const ForwardContext& ctx, const CsrMatrix& adj, const Tensor& h);
  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  const StackOptions& options() const { return opts_; }
  bool frozen = false;

 private:
  StackOptions opts_;
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
  std::vector<MeanAggLayer> layers_;
};

/// Early fusion: concat modalities, project, propagate, classify.
struct JointModel {
  Projector projector;
  GnnStack stack;
  Linear head;

  JointModel(const std::vector<std::size_t>& modality_dims, const StackOptions& opts, std::size_t hidden,
             std::size_t classes, std::mt19937_64& rng);
  std::vector<Parameter*> parameters();
};

Tensor joint_forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj,
                     JointModel& model);

/// Late fusion: one projector + stack per modality, outputs concatenated
/// into a single shared linear head.
struct IndependentModel {
  std::vector<Projector> projectors;
  std::vector<GnnStack> stacks;
  Linear head;

  IndependentModel(const std::vector<std::size_t>& modality_dims, const StackOptions& opts, std::size_t hidden,
                   std::size_t classes, std::mt19937_64& rng);
  std::vector<Parameter*> parameters();
};

Tensor independent_forward(const ForwardContext& ctx, const std::vector<Tensor>& features, const CsrMatrix& adj,
                           IndependentModel& model);

/// (node, node) entry of (alpha I + (1 - alpha) A)^layers for a row-mean
/// normalized A, via repeated sparse mat-vec on a basis vector.
double ego_jacobian_diag(const CsrMatrix& adj, double alpha, std::size_t layers, std::size_t node);

}  // namespace magsim
