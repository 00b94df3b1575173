#include <doctest.h>

#include <cmath>

#include "magsim/errors.hpp"
#include "magsim/graph.hpp"

using namespace magsim;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_nodes = 400;
  s.seed = 7;
  return s;
}

double mean_inverse_degree(const Mag& mag) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < mag.num_nodes; ++v) {
    if (mag.adjacency.degree(v) == 0) continue;
    total += 1.0 / static_cast<double>(mag.adjacency.degree(v));
    ++count;
  }
  return total / static_cast<double>(count);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("generated graph satisfies invariants") {
  const Mag mag = generate(small_spec());
  CHECK_NOTHROW(mag.validate());
  CHECK(mag.adjacency.is_symmetric_pattern());
  CHECK(mag.splits.train.size() + mag.splits.val.size() + mag.splits.test.size() == mag.num_nodes);
  CHECK(mag.features.size() == 2);
  CHECK(mag.features[0].cols == 32);
  for (double v : mag.features[1].data) CHECK(static_cast<double>(static_cast<float>(v)) == v);
}

TEST_CASE("generation is deterministic") {
  const Mag a = generate(small_spec());
  const Mag b = generate(small_spec());
  CHECK(same_dataset(a, b));
  SyntheticSpec other = small_spec();
  other.seed = 8;
  CHECK_FALSE(same_dataset(a, generate(other)));
}

TEST_CASE("noiseless pure homophily: neighborhood mean equals own signal") {
  SyntheticSpec s = small_spec();
  s.homophily = 1.0;
  s.modalities = {{"text", 8, 1.0, 0.0}};
  const Mag mag = generate(s);
  CHECK(same_class_edge_fraction(mag) == 1.0);
  CHECK(measure_neighborhood_noise(mag, "text", 1.0) < 1e-10);
  CHECK(measure_alignment(mag, "text") == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("same-class edge census") {
  SyntheticSpec s;
  s.num_nodes = 5000;
  s.num_classes = 4;
  s.homophily = 0.7;
  s.mean_degree = 10;
  s.seed = 1;
  const double frac = same_class_edge_fraction(generate(s));
  CHECK(frac >= 0.67);
  CHECK(frac <= 0.73);
}

TEST_CASE("neighborhood noise averages neighbor noise") {
  SyntheticSpec s;
  s.num_nodes = 3000;
  s.homophily = 1.0;
  s.mean_degree = 25;
  s.modalities = {{"text", 32, 1.0, 1.0}};
  s.seed = 2;
  const Mag mag = generate(s);
  // Each neighbor contributes independent noise of energy 1, so the mean
  // over deg(v) neighbors has energy 1/deg(v). Symmetrization roughly
  // doubles the drawn out-degree.
  const double oracle = mean_inverse_degree(mag);
  const double measured = measure_neighborhood_noise(mag, "text", 1.0);
  CHECK(measured == doctest::Approx(oracle).epsilon(0.10));
  CHECK(measured < 1.0 / 25.0);

  // beta = 0 gives the raw second moment of the neighborhood mean.
  const double raw = measure_neighborhood_noise(mag, "text", 0.0);
  CHECK(raw == doctest::Approx(1.0 + oracle).epsilon(0.05));
}

TEST_CASE("encoder noise and signal energy") {
  SyntheticSpec s = small_spec();
  s.num_nodes = 3000;
  s.modalities = {{"text", 16, 2.0, 0.5}};
  const Mag mag = generate(s);
  CHECK(signal_energy(mag, "text") == doctest::Approx(4.0).epsilon(1e-6));  // float32 signals
  CHECK(measure_encoder_noise(mag, "text") == doctest::Approx(0.5).epsilon(0.05));
  CHECK_THROWS(measure_alignment(mag, "audio"));
}

TEST_CASE("inject_noise") {
  SyntheticSpec s = small_spec();
  s.num_nodes = 3000;
  const Mag mag = generate(s);
  CHECK(same_dataset(inject_noise(mag, 0.0, 1), mag));
  CHECK(same_dataset(inject_noise(mag, 1.0, 5), inject_noise(mag, 1.0, 5)));
  CHECK_THROWS_AS(inject_noise(mag, -1.0, 1), ValueError);

  // Unit-variance features: adding unit-scaled noise doubles the variance.
  Mag unit = mag;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& v : unit.features[0].data) v = static_cast<float>(g(rng));
  const Mag noisy = inject_noise(unit, 1.0, 3);
  auto variance = [](const Matrix& x) {
    double mu = 0, var = 0;
    for (double v : x.data) mu += v;
    mu /= static_cast<double>(x.size());
    for (double v : x.data) var += (v - mu) * (v - mu);
    return var / static_cast<double>(x.size());
  };
  CHECK(variance(noisy.features[0]) / variance(unit.features[0]) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("corrupt_modality") {
  SyntheticSpec s = small_spec();
  s.num_nodes = 2000;
  const Mag mag = generate(s);
  const Mag bad = corrupt_modality(mag, "text", 4);
  CHECK(same_dataset(bad, corrupt_modality(mag, "text", 4)));
  CHECK(bad.features[1] == mag.features[1]);
  for (std::size_t v : mag.splits.train) {
    CHECK(bad.features[0].row(v)[0] == mag.features[0].row(v)[0]);
  }
  std::vector<double> a, b;
  for (std::size_t v : mag.splits.test) {
    for (std::size_t j = 0; j < mag.features[0].cols; ++j) {
      a.push_back(mag.features[0](v, j));
      b.push_back(bad.features[0](v, j));
    }
  }
  CHECK(std::abs(pearson(a, b)) < 0.05);
}

TEST_CASE("estimated signals for loaded datasets") {
  Mag mag = generate(small_spec());
  Mag stripped = mag;
  stripped.class_signals.reset();
  CHECK_THROWS(measure_alignment(stripped, "text"));
  const Mag est = with_estimated_signals(stripped);
  REQUIRE(est.class_signals.has_value());
  CHECK(measure_alignment(est, "text") > 0.5);
}

TEST_CASE("generator rejects bad specs") {
  SyntheticSpec s = small_spec();
  s.homophily = 0.0;
  CHECK_THROWS_AS(generate(s), ValueError);
  s = small_spec();
  s.modalities = {{"text", 2, 1.0, 1.0}};
  CHECK_THROWS_AS(generate(s), ValueError);
  s = small_spec();
  s.train_frac = 0.9;
  s.val_frac = 0.2;
  CHECK_THROWS_AS(generate(s), ValueError);
}
