#include <doctest.h>

#include <cmath>
#include <random>

#include "magsim/errors.hpp"
#include "magsim/graph.hpp"
#include "magsim/theory.hpp"

using namespace magsim;

namespace {

SnrParams params(double s, double eps, double n, double alpha, double beta) {
  SnrParams p;
  p.signal_sq = s;
  p.sigma_eps_sq = eps;
  p.sigma_n_sq = n;
  p.alpha = alpha;
  p.beta = beta;
  return p;
}

}  // namespace

TEST_CASE("snr_int") {
  CHECK(snr_int(params(3.0, 1.0 / 3.0, 1.0, 0.5, 1.0)) == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(snr_int(params(2.0, 2.0, 1.0, 0.5, 1.0)) == 1.0);
  CHECK(snr_int(params(2.0, 0.0, 1.0, 0.5, 1.0)) == kInfinity);
  CHECK_THROWS_AS(snr_int(params(0.0, 1.0, 1.0, 0.5, 1.0)), ValueError);
  CHECK_THROWS_AS(snr_int(params(1.0, 1.0, 1.0, 1.0, 1.0)), ValueError);
}

TEST_CASE("snr_int agrees with a generator census") {
  SyntheticSpec spec;
  spec.num_nodes = 4000;
  spec.modalities = {{"text", 32, 1.5, 0.4}};
  const Mag mag = generate(spec);
  const double empirical = signal_energy(mag, "text") / measure_encoder_noise(mag, "text");
  CHECK(empirical == doctest::Approx(snr_int(params(2.25, 0.4, 1.0, 0.5, 1.0))).epsilon(0.05));
}

TEST_CASE("snr_post") {
  CHECK(snr_post(params(1.0, 1.0 / 3.0, 1.0, 0.5, 1.0)) == doctest::Approx(3.0).epsilon(1e-14));
  const SnrParams clean = params(2.0, 0.5, 0.0, 0.3, 1.0);
  CHECK(snr_post(clean) == doctest::Approx(2.0 / (0.09 * 0.5)).epsilon(1e-14));
  CHECK(snr_post(clean) >= snr_int(clean));
  CHECK(snr_post(params(1.0, 0.0, 0.0, 0.5, 1.0)) == kInfinity);
}

TEST_CASE("tau") {
  CHECK(tau(0.5, 1.0, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(tau(0.3, 0.7, 0.0) == 0.0);
  CHECK(tau(0.9, 0.5, 2.0) == doctest::Approx(0.2 / 0.925).epsilon(1e-14));
  CHECK(tau(0.9, 0.5, 2.0) == doctest::Approx(0.21622).epsilon(1e-5));
  CHECK(tau(0.5, 0.0, 1.0) == kInfinity);
  CHECK_THROWS_AS(tau(0.5, 1.5, 1.0), ValueError);
}

TEST_CASE("crossover") {
  SnrParams p = params(1.7, 0.0, 0.8, 0.4, 0.6);
  const double t = tau(p.alpha, p.beta, p.sigma_n_sq);
  p.sigma_eps_sq = t;
  CHECK(std::abs(crossover(p).margin) < 1e-12);
  CHECK_FALSE(crossover(p).degraded);
  p.sigma_eps_sq = t / 2.0;
  CHECK(crossover(p).degraded);
  CHECK(crossover(p).margin < 0.0);
  p.sigma_eps_sq = 2.0 * t;
  CHECK_FALSE(crossover(p).degraded);
  CHECK(crossover(p).margin > 0.0);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    SnrParams q = params(0.1 + 5 * u(rng), 1e-3 + 5 * u(rng), 1e-3 + 5 * u(rng), 0.01 + 0.98 * u(rng),
                         0.01 + 0.99 * u(rng));
    const Crossover c = crossover(q);
    const double t2 = tau(q.alpha, q.beta, q.sigma_n_sq);
    CHECK(c.degraded == (q.sigma_eps_sq < t2));
    CHECK((c.margin < 0.0) == (q.sigma_eps_sq < t2));
    // Margin agrees with the direct difference.
    CHECK(c.margin == doctest::Approx(snr_post(q) - snr_int(q)).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("snr_post monotonicity") {
  const SnrParams base = params(1.2, 0.4, 0.9, 0.4, 0.5);
  const double h = 1e-6;
  SnrParams up = base;
  up.beta += h;
  CHECK(snr_post(up) > snr_post(base));
  up = base;
  up.signal_sq += h;
  CHECK(snr_post(up) > snr_post(base));
  up = base;
  up.sigma_n_sq += h;
  CHECK(snr_post(up) < snr_post(base));
}

TEST_CASE("high-confidence limit") {
  double prev = kInfinity;
  for (double eps : {1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const SnrParams p = params(1.0, eps, 0.5, 0.5, 0.8);
    const double ratio = snr_post(p) / snr_int(p);
    CHECK(ratio < prev);
    prev = ratio;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("monte carlo estimate") {
  CHECK(mc_snr_post(params(1.0, 0.0, 0.0, 0.5, 1.0), 8, 2000, 1) == kInfinity);
  CHECK_THROWS_AS(mc_snr_post(params(1.0, 1.0, 1.0, 0.5, 1.0), 8, 10, 1), ValueError);
  const SnrParams p = params(1.3, 0.7, 1.1, 0.35, 0.6);
  const double exact = snr_post(p);
  CHECK(mc_snr_post(p, 16, 20000, 3) == doctest::Approx(exact).epsilon(0.05));

  // Averaged over seeds, more samples land closer.
  double small = 0.0, large = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    small += std::abs(mc_snr_post(p, 4, 2000, s) - exact);
    large += std::abs(mc_snr_post(p, 4, 4000, 100 + s) - exact);
  }
  CHECK(large < small);
}

TEST_CASE("starvation bound arithmetic") {
  CHECK(starvation_bound(EtaMode::bypass(), 0.0, 3.0, 2.0) == 0.0);
  CHECK(starvation_bound(EtaMode::gnn(3, 0.5), 1.0, 1.0, 2.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(EtaMode::gnn(2, 0.3).eta() == doctest::Approx(0.09).epsilon(1e-15));
  CHECK_THROWS_AS(EtaMode::gnn(0, 0.5), ValueError);
}

TEST_CASE("starvation bound holds on the linear construction") {
  for (std::uint64_t k = 0; k < 50; ++k) {
    for (std::size_t layers : {0u, 1u, 3u}) {
      for (bool relu : {false, true}) {
        StarvationSpec spec;
        spec.layers = layers;
        spec.relu_encoder = relu;
        spec.alpha = 0.3 + 0.01 * static_cast<double>(k);
        const StarvationMeasurement m = measure_linear_starvation(spec, k);
        CHECK(m.grad_norm <= m.bound * (1.0 + 1e-9) + 1e-15);
        if (!relu && layers == 0) CHECK(m.grad_norm == doctest::Approx(m.bound).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("ego gradient on the chain") {
  const CsrMatrix chain = directed_chain(50);
  for (double alpha : {0.3, 0.5, 0.9}) {
    for (std::size_t layers = 1; layers <= 4; ++layers) {
      CHECK(std::abs(autodiff_ego_gradient(chain, alpha, layers, 20) - std::pow(alpha, double(layers))) < 1e-10);
    }
  }
}

TEST_CASE("theory property suite") {
  const auto results = run_theory_checks(0);
  REQUIRE(results.size() == 4);
  for (const auto& r : results) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.pass);
  }
}
