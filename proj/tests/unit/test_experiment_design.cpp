#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "qrot/experiment_design.hpp"

using namespace qrot;

namespace {

const ControlSet kControls;

struct Fixture {
  std::vector<ParameterPoint> points;
  std::vector<double> weights;
  std::vector<oracle::Particle> op;

  Ensemble ensemble() const { return Ensemble::from_particles(points, weights); }
};

// Random particles concentrated around a centre; `spread` scales theta.
Fixture make_fixture(std::size_t n, std::uint64_t seed, double spread) {
  RngStream rng(seed);
  Fixture f;
  const double centre = kPi * rng.uniform();
  for (std::size_t k = 0; k < n; ++k) {
    const double theta = wrap_angle(centre + spread * rng.normal());
    const std::array<double, 4> v{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    f.points.push_back(ParameterPoint::make(theta, v));
    f.weights.push_back(0.1 + rng.uniform());
    f.op.push_back({theta, v});
  }
  return f;
}

}  // namespace

TEST_CASE("predictive probability") {
  std::vector<ParameterPoint> zero_v;
  for (int k = 0; k < 20; ++k) zero_v.push_back(ParameterPoint::make(0.1 * k, {0.0, 0.0, 0.0, 0.0}));
  const auto e0 = Ensemble::from_particles(zero_v);
  for (const auto& st : all_settings(kControls)) {
    CHECK(predictive_probability(e0, st, Outcome::Plus) == doctest::Approx(0.5).epsilon(1e-15));
  }
  const auto pt = ParameterPoint::make(0.38, {0.9399, 0.9153, 0.7936, 0.7222});
  const auto e1 = Ensemble::from_particles(std::vector{pt});
  for (const auto& st : all_settings(kControls)) {
    CHECK(predictive_probability(e1, st, Outcome::Minus) == doctest::Approx(likelihood(Outcome::Minus, st, pt)).epsilon(1e-14));
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto e = make_fixture(301, seed, 1.0).ensemble();
    for (const auto& st : all_settings(kControls)) {
      const double sum = predictive_probability(e, st, Outcome::Plus) + predictive_probability(e, st, Outcome::Minus);
      CHECK(std::abs(sum - 1.0) < 1e-12);
      const auto c = evaluate_candidate(e, st, WeightMatrix::phase_only());
      CHECK(c.predictive[0] + c.predictive[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("expected variance trivial cases") {
  const auto e = make_fixture(200, 3, 0.2).ensemble();
  for (const auto& st : all_settings(kControls)) CHECK(expected_variance(e, st, WeightMatrix::zero()) == 0.0);
  const auto pt = ParameterPoint::make(2.0, {0.3, 0.4, 0.5, 0.6});
  const auto mass = Ensemble::from_particles(std::vector<ParameterPoint>(30, pt));
  for (const auto& st : all_settings(kControls)) CHECK(expected_variance(mass, st, WeightMatrix({1, 1, 1, 1, 1})) < 1e-15);
}

TEST_CASE("expected variance equals clone-and-recompute") {
  const std::array<std::array<double, 5>, 4> gs{{{1, 0, 0, 0, 0}, {1, 0, 0, 0, 1}, {0, 1, 1, 1, 1}, {2, 0.5, 0, 3, 0}}};
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto f = make_fixture(257, seed, seed % 2 ? 0.1 : 0.6);
    const auto e = f.ensemble();
    for (const auto& g : gs) {
      for (const auto& st : all_settings(kControls)) {
        const double ours = expected_variance(e, st, WeightMatrix(g));
        const double ref = oracle::expected_variance(f.op, f.weights, static_cast<int>(st.index),
                                                     static_cast<int>(st.basis), g);
        CHECK(std::abs(ours - ref) < 1e-12);
      }
    }
  }
}

TEST_CASE("untouched visibility uses the prior-marginal likelihood") {
  RngStream rng(5);
  const auto e = init_prior(400, rng);
  const auto st = ControlSetting::make(kControls, 3, Basis::B1);
  double c = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) c += e.weights()[k] * std::cos(2.0 * 51 * e.theta()[k]);
  double ref = 0.0;
  for (int o : {-1, 1}) {
    // Posterior of V on [0, 1] with density proportional to 1 + o c V.
    const double z = oracle::average([&](double v) { return 1 + o * c * v; }, 0, 1, 4);
    const double m1 = oracle::average([&](double v) { return v * (1 + o * c * v); }, 0, 1, 4) / z;
    const double m2 = oracle::average([&](double v) { return v * v * (1 + o * c * v); }, 0, 1, 4) / z;
    ref += 0.5 * z * (m2 - m1 * m1);
  }
  CHECK(expected_variance(e, st, WeightMatrix({0, 0, 0, 0, 1})) == doctest::Approx(ref).epsilon(1e-12));
  CHECK(predictive_probability(e, st, Outcome::Plus) == doctest::Approx(0.5 * (1 + 0.5 * c)).epsilon(1e-12));
  // Other untouched coordinates keep the prior variance.
  CHECK(expected_variance(e, st, WeightMatrix({0, 1, 0, 0, 0})) == doctest::Approx(1.0 / 12.0).epsilon(1e-15));
}

TEST_CASE("greedy selection") {
  // theta known exactly, only V4 weighted: only s = 51 is informative.
  RngStream rng(9);
  std::vector<ParameterPoint> p;
  for (int k = 0; k < 2000; ++k) p.push_back(ParameterPoint::make(0.4, {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()}));
  const auto e = Ensemble::from_particles(p);
  const WeightMatrix g4({0, 0, 0, 0, 1});
  const auto chosen = greedy_select(e, g4);
  CHECK(chosen.s == 51);
  const auto all = evaluate_candidates(e, g4);
  for (const auto& c : all) {
    if (c.setting.s != 51) CHECK(c.expected_variance > expected_variance(e, chosen, g4));
  }

  const auto tie = greedy_select(e, WeightMatrix::zero());
  CHECK(tie.s == 1);
  CHECK(tie.basis == Basis::B1);
}

TEST_CASE("greedy argmin against independent recomputation") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto f = make_fixture(199, seed, 0.3);
    const auto e = f.ensemble();
    const std::array<double, 5> g{1, 0, 0, 1, 0};
    const auto chosen = greedy_select(e, WeightMatrix(g));
    const double best = oracle::expected_variance(f.op, f.weights, static_cast<int>(chosen.index),
                                                  static_cast<int>(chosen.basis), g);
    for (const auto& st : all_settings(kControls)) {
      CHECK(best <= oracle::expected_variance(f.op, f.weights, static_cast<int>(st.index), static_cast<int>(st.basis), g) + 1e-12);
    }
    CHECK(greedy_select(e, WeightMatrix(g)) == chosen);
    CHECK(greedy_select(e, WeightMatrix(g).scaled(7.5)) == chosen);
  }
}

TEST_CASE("information does not hurt in expectation") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto e = make_fixture(500, 50 + seed, 0.05).ensemble();
    const WeightMatrix g({1, 1, 1, 1, 1});
    const double now = summarize(e, g).scalar_variance;
    for (const auto& st : all_settings(kControls)) CHECK(expected_variance(e, st, g) <= now + 1e-9);
  }
}
