#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "magsim/csr.hpp"
#include "magsim/tensor.hpp"

namespace magsim {

struct ModalityInfo {
  std::string name;
  std::size_t dim = 0;

  bool operator==(const ModalityInfo&) const = default;
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  bool operator==(const Splits&) const = default;
};

/// Multimodal attributed graph.
///
/// `adjacency` is the binary symmetric pattern; models consume
/// `mean_adjacency()`. `class_signals` holds the per-modality C x d_m class
/// signal matrix for generated data and is empty for loaded datasets.
struct Mag {
  std::size_t num_nodes = 0;
  std::size_t num_classes = 0;
  std::vector<ModalityInfo> modalities;
  std::vector<Matrix> features;
  std::vector<std::size_t> labels;
  Splits splits;
  CsrMatrix adjacency;
  std::optional<std::vector<Matrix>> class_signals;

  std::size_t modality_index(std::string_view name) const;
  CsrMatrix mean_adjacency() const { return adjacency.row_normalized(); }
  std::vector<std::size_t> labels_of(const std::vector<std::size_t>& rows) const;

  /// Throws ContractError on any broken invariant.
  void validate() const;
};

/// Bitwise equality of every persisted field (signals are not persisted).
bool same_dataset(const Mag& a, const Mag& b);

struct ModalitySpec {
  std::string name;
  std::size_t dim = 32;
  double signal_norm = 1.0;  // ||s||
  double noise_var = 1.0;    // E||eps||^2, total over all dimensions
};

struct SyntheticSpec {
  std::size_t num_nodes = 2000;
  std::size_t num_classes = 4;
  std::vector<ModalitySpec> modalities{{"text", 32, 1.0, 0.1}, {"visual", 32, 1.0, 1.0}};
  double homophily = 0.8;
  std::size_t mean_degree = 10;  // out-degree drawn per node before symmetrization
  double train_frac = 0.6;
  double val_frac = 0.2;
  std::uint64_t seed = 0;
};

/// Draws a graph from the class-signal-plus-noise feature model with
/// homophilous k-out edges. Features are rounded to float32 precision so the
/// on-disk format round-trips exactly.
Mag generate(const SyntheticSpec& spec);

/// Mean over nodes with a nonempty neighborhood of || xbar_N(v) - beta * s_{y_v} ||^2.
double measure_neighborhood_noise(const Mag& mag, std::string_view modality, double beta);

/// E[<xbar_N(v), s_{y_v}>] / ||s||^2 over nodes with a nonempty neighborhood.
double measure_alignment(const Mag& mag, std::string_view modality);

/// Mean over nodes of ||x_v - s_{y_v}||^2.
double measure_encoder_noise(const Mag& mag, std::string_view modality);

/// ||s||^2 of the modality's class signals (mean over classes).
double signal_energy(const Mag& mag, std::string_view modality);

/// Fraction of undirected edges joining same-class endpoints.
double same_class_edge_fraction(const Mag& mag);

/// x + scale * sigma_feat * eta per modality, eta standard normal and
/// sigma_feat the modality's empirical feature standard deviation.
Mag inject_noise(const Mag& mag, double scale, std::uint64_t seed);

/// Replaces the test rows of one modality with zero-mean Gaussian rows whose
/// per-dimension standard deviation matches the original column.
Mag corrupt_modality(const Mag& mag, std::string_view modality, std::uint64_t seed);

/// Copy whose class signals are the per-class feature means, for datasets
/// loaded from disk. Generated datasets are returned unchanged.
Mag with_estimated_signals(const Mag& mag);

}  // namespace magsim
