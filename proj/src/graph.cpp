#include "magsim/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "magsim/errors.hpp"
#include "magsim/seed.hpp"

namespace magsim {

namespace {

double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

const Matrix& signals_for(const Mag& mag, std::size_t m) {
  if (!mag.class_signals) throw ContractError("dataset carries no class signals (not generated synthetically)");
  return (*mag.class_signals)[m];
}

// Gram-Schmidt on Gaussian rows; each row rescaled to `norm`.
Matrix orthogonal_signals(std::size_t classes, std::size_t dim, double norm, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix s(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    auto row = s.row(c);
    for (;;) {
      for (double& v : row) v = gauss(rng);
      for (std::size_t p = 0; p < c; ++p) {
        auto prev = s.row(p);
        double dot = 0.0;
        for (std::size_t j = 0; j < dim; ++j) dot += row[j] * prev[j];
        for (std::size_t j = 0; j < dim; ++j) row[j] -= dot * prev[j];
      }
      const double n = l2_norm(row);
      if (n > 1e-6) {
        for (double& v : row) v /= n;
        break;
      }
    }
  }
  for (double& v : s.data) v = to_f32(v * norm);
  return s;
}

// Neighborhood mean of `x` at node v, written into `out`. Returns false for
// isolated nodes.
bool neighborhood_mean(const Mag& mag, const Matrix& x, std::size_t v, std::vector<double>& out) {
  auto nbrs = mag.adjacency.neighbors(v);
  std::fill(out.begin(), out.end(), 0.0);
  if (nbrs.empty()) return false;
  for (std::size_t u : nbrs) {
    auto xu = x.row(u);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += xu[j];
  }
  const double inv = 1.0 / static_cast<double>(nbrs.size());
  for (double& o : out) o *= inv;
  return true;
}

}  // namespace

std::size_t Mag::modality_index(std::string_view name) const {
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    if (modalities[m].name == name) return m;
  }
  throw ValueError("unknown modality '" + std::string(name) + "'");
}

std::vector<std::size_t> Mag::labels_of(const std::vector<std::size_t>& rows) const {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels.at(r));
  return out;
}

void Mag::validate() const {
  if (features.size() != modalities.size()) throw ContractError("one feature matrix per modality required");
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    if (features[m].rows != num_nodes || features[m].cols != modalities[m].dim) {
      throw ContractError("feature matrix for '" + modalities[m].name + "' has shape " + features[m].shape_string());
    }
  }
  if (labels.size() != num_nodes) throw ContractError("labels length differs from num_nodes");
  for (std::size_t y : labels) {
    if (y >= num_classes) throw ContractError("label " + std::to_string(y) + " >= num_classes");
  }
  if (adjacency.num_rows() != num_nodes || adjacency.num_cols() != num_nodes) {
    throw ContractError("adjacency must be square with num_nodes rows");
  }
  std::vector<char> seen(num_nodes, 0);
  for (const auto* split : {&splits.train, &splits.val, &splits.test}) {
    if (split->empty()) throw ContractError("empty split");
    for (std::size_t i : *split) {
      if (i >= num_nodes) throw ContractError("split index " + std::to_string(i) + " out of range");
      if (seen[i]) throw ContractError("splits overlap at node " + std::to_string(i));
      seen[i] = 1;
    }
  }
}

bool same_dataset(const Mag& a, const Mag& b) {
  return a.num_nodes == b.num_nodes && a.num_classes == b.num_classes && a.modalities == b.modalities &&
         a.features == b.features && a.labels == b.labels && a.splits == b.splits && a.adjacency == b.adjacency;
}

Mag generate(const SyntheticSpec& spec) {
  const std::size_t n = spec.num_nodes;
  const std::size_t classes = spec.num_classes;
  if (classes == 0) throw ValueError("num_classes must be positive");
  if (n < 3) throw ValueError("num_nodes must be at least 3");
  if (!(spec.homophily > 0.0 && spec.homophily <= 1.0)) throw ValueError("homophily must be in (0, 1]");
  if (spec.mean_degree < 1) throw ValueError("mean_degree must be >= 1");
  if (spec.modalities.empty()) throw ValueError("at least one modality required");
  for (const auto& ms : spec.modalities) {
    if (ms.dim < classes) {
      throw ValueError("modality '" + ms.name + "' has dim " + std::to_string(ms.dim) + " < num_classes " +
                       std::to_string(classes));
    }
    if (ms.noise_var < 0.0 || ms.signal_norm <= 0.0) throw ValueError("modality '" + ms.name + "' has invalid signal/noise");
  }
  if (spec.train_frac <= 0.0 || spec.val_frac <= 0.0 || spec.train_frac + spec.val_frac >= 1.0) {
    throw ValueError("split fractions must be positive and leave room for a test split");
  }

  Mag mag;
  mag.num_nodes = n;
  mag.num_classes = classes;

  // Balanced labels, shuffled.
  std::mt19937_64 label_rng(derive_seed(spec.seed, "labels"));
  mag.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) mag.labels[i] = i % classes;
  std::shuffle(mag.labels.begin(), mag.labels.end(), label_rng);

  std::vector<Matrix> signals;
  for (const auto& ms : spec.modalities) {
    std::mt19937_64 sig_rng(derive_seed(spec.seed, "signal:" + ms.name));
    Matrix s = orthogonal_signals(classes, ms.dim, ms.signal_norm, sig_rng);

    std::mt19937_64 noise_rng(derive_seed(spec.seed, "noise:" + ms.name));
    std::normal_distribution<double> gauss(0.0, std::sqrt(ms.noise_var / static_cast<double>(ms.dim)));
    Matrix x(n, ms.dim);
    for (std::size_t v = 0; v < n; ++v) {
      auto sv = s.row(mag.labels[v]);
      auto xv = x.row(v);
      for (std::size_t j = 0; j < ms.dim; ++j) xv[j] = to_f32(sv[j] + gauss(noise_rng));
    }
    mag.modalities.push_back({ms.name, ms.dim});
    mag.features.push_back(std::move(x));
    signals.push_back(std::move(s));
  }
  mag.class_signals = std::move(signals);

  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t v = 0; v < n; ++v) members[mag.labels[v]].push_back(v);

  std::mt19937_64 edge_rng(derive_seed(spec.seed, "edges"));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Edge> edges;
  edges.reserve(n * spec.mean_degree);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t y = mag.labels[v];
    for (std::size_t d = 0; d < spec.mean_degree; ++d) {
      const bool same = classes == 1 || coin(edge_rng) < spec.homophily;
      std::size_t target_class = y;
      if (!same) {
        std::uniform_int_distribution<std::size_t> pick(0, classes - 2);
        target_class = pick(edge_rng);
        if (target_class >= y) ++target_class;
      }
      const auto& pool = members[target_class];
      if (pool.size() < 2 && target_class == y) continue;
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      std::size_t u = pool[pick(edge_rng)];
      while (u == v) u = pool[pick(edge_rng)];
      edges.emplace_back(std::min(u, v), std::max(u, v));
    }
  }
  mag.adjacency = CsrMatrix::from_edges(n, edges, /*symmetrize=*/true);

  std::mt19937_64 split_rng(derive_seed(spec.seed, "splits"));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), split_rng);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(spec.val_frac * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) throw ValueError("split fractions leave an empty split");
  mag.splits.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  mag.splits.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                        perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  mag.splits.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  std::sort(mag.splits.train.begin(), mag.splits.train.end());
  std::sort(mag.splits.val.begin(), mag.splits.val.end());
  std::sort(mag.splits.test.begin(), mag.splits.test.end());

  mag.validate();
  return mag;
}

double measure_neighborhood_noise(const Mag& mag, std::string_view modality, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValueError("beta must be in [0, 1]");
  const std::size_t m = mag.modality_index(modality);
  const Matrix& s = signals_for(mag, m);
  const Matrix& x = mag.features[m];
  std::vector<double> xbar(x.cols);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < mag.num_nodes; ++v) {
    if (!neighborhood_mean(mag, x, v, xbar)) continue;
    auto sv = s.row(mag.labels[v]);
    double sq = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double r = xbar[j] - beta * sv[j];
      sq += r * r;
    }
    total += sq;
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

double measure_alignment(const Mag& mag, std::string_view modality) {
  const std::size_t m = mag.modality_index(modality);
  const Matrix& s = signals_for(mag, m);
  const Matrix& x = mag.features[m];
  std::vector<double> xbar(x.cols);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t v = 0; v < mag.num_nodes; ++v) {
    if (!neighborhood_mean(mag, x, v, xbar)) continue;
    auto sv = s.row(mag.labels[v]);
    for (std::size_t j = 0; j < x.cols; ++j) {
      num += xbar[j] * sv[j];
      den += sv[j] * sv[j];
    }
  }
  return den == 0.0 ? 0.0 : num / den;
}

double measure_encoder_noise(const Mag& mag, std::string_view modality) {
  const std::size_t m = mag.modality_index(modality);
  const Matrix& s = signals_for(mag, m);
  const Matrix& x = mag.features[m];
  double total = 0.0;
  for (std::size_t v = 0; v < mag.num_nodes; ++v) {
    auto sv = s.row(mag.labels[v]);
    auto xv = x.row(v);
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double e = xv[j] - sv[j];
      total += e * e;
    }
  }
  return total / static_cast<double>(mag.num_nodes);
}

double signal_energy(const Mag& mag, std::string_view modality) {
  const std::size_t m = mag.modality_index(modality);
  const Matrix& s = signals_for(mag, m);
  double total = 0.0;
  for (double v : s.data) total += v * v;
  return total / static_cast<double>(s.rows);
}

double same_class_edge_fraction(const Mag& mag) {
  std::size_t same = 0;
  std::size_t total = 0;
  for (std::size_t v = 0; v < mag.num_nodes; ++v) {
    for (std::size_t u : mag.adjacency.neighbors(v)) {
      if (u <= v) continue;
      ++total;
      if (mag.labels[u] == mag.labels[v]) ++same;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(same) / static_cast<double>(total);
}

Mag inject_noise(const Mag& mag, double scale, std::uint64_t seed) {
  if (!(scale >= 0.0)) throw ValueError("noise scale must be nonnegative");
  Mag out = mag;
  if (scale == 0.0) return out;
  for (std::size_t m = 0; m < out.features.size(); ++m) {
    Matrix& x = out.features[m];
    double mu = 0.0;
    for (double v : x.data) mu += v;
    mu /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x.data) var += (v - mu) * (v - mu);
    const double sigma = std::sqrt(var / static_cast<double>(x.size()));

    std::mt19937_64 rng(derive_seed(seed, "inject:" + out.modalities[m].name));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : x.data) v = to_f32(v + scale * sigma * gauss(rng));
  }
  return out;
}

Mag corrupt_modality(const Mag& mag, std::string_view modality, std::uint64_t seed) {
  const std::size_t m = mag.modality_index(modality);
  Mag out = mag;
  Matrix& x = out.features[m];
  const Matrix& orig = mag.features[m];
  std::vector<double> col_std(orig.cols, 0.0);
  for (std::size_t j = 0; j < orig.cols; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < orig.rows; ++i) mu += orig(i, j);
    mu /= static_cast<double>(orig.rows);
    double var = 0.0;
    for (std::size_t i = 0; i < orig.rows; ++i) var += (orig(i, j) - mu) * (orig(i, j) - mu);
    col_std[j] = std::sqrt(var / static_cast<double>(orig.rows));
  }
  std::mt19937_64 rng(derive_seed(seed, "corrupt:" + std::string(modality)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t v : out.splits.test) {
    auto row = x.row(v);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = to_f32(col_std[j] * gauss(rng));
  }
  return out;
}

Mag with_estimated_signals(const Mag& mag) {
  Mag out = mag;
  if (out.class_signals) return out;
  std::vector<Matrix> signals;
  std::vector<double> counts(mag.num_classes, 0.0);
  for (std::size_t y : mag.labels) counts[y] += 1.0;
  for (const Matrix& x : mag.features) {
    Matrix s(mag.num_classes, x.cols);
    for (std::size_t v = 0; v < mag.num_nodes; ++v) {
      auto src = x.row(v);
      auto dst = s.row(mag.labels[v]);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
    for (std::size_t c = 0; c < mag.num_classes; ++c) {
      if (counts[c] == 0.0) continue;
      for (double& v : s.row(c)) v /= counts[c];
    }
    signals.push_back(std::move(s));
  }
  out.class_signals = std::move(signals);
  return out;
}

}  // namespace magsim
