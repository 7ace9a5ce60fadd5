#include "qrot/experiment_design.hpp"

#include <algorithm>
#include <cmath>

#include "qrot/errors.hpp"

namespace qrot {
namespace {

constexpr double kPriorVariance = 1.0 / 12.0;

// Posterior of a prior-exact V after one photon: density proportional to
// 1 + o V c on [0, 1], where c = E_w[fringe].
double marginal_visibility_variance(double o, double c) {
  const double z = 1.0 + o * c / 2.0;
  const double mean = (0.5 + o * c / 3.0) / z;
  const double second = (1.0 / 3.0 + o * c / 4.0) / z;
  return std::max(second - mean * mean, 0.0);
}

double branch_mean(double sum_cos2, double sum_sin2, double z) {
  const double resultant = std::hypot(sum_cos2, sum_sin2);
  if (!(resultant > kMinResultant * z)) {
    throw UndefinedMean("circular mean undefined in a hypothetical branch");
  }
  return wrap_angle(0.5 * std::atan2(sum_sin2, sum_cos2));
}

kernels::Factor multiplier(const Ensemble& e, const ControlSetting& setting) {
  if (e.prior_exact(setting.index)) return kernels::Factor::uniform(0.5);
  return kernels::Factor::column(e.visibility(setting.index).data());
}

CandidateEvaluation evaluate(const Ensemble& e, const kernels::Moments& base, const ControlSetting& setting,
                             const WeightMatrix& g) {
  const auto& kt = kernels::active();
  const auto cols = e.columns();
  const double* fr = e.fringe_column(setting);
  const auto mult = multiplier(e, setting);
  const auto split = kt.moments(cols, mult, fr);

  CandidateEvaluation out;
  out.setting = setting;
  const double w = base.weight;
  const double c_bar = e.prior_exact(setting.index) ? 2.0 * split.weight / w : 0.0;

  // Branch b = 0 is o = -1, b = 1 is o = +1. z_b = sum_k w_k (1 + o m_k f_k).
  std::array<double, 2> z{};
  std::array<double, 2> mu{};
  std::array<bool, 2> live{};
  for (int b = 0; b < 2; ++b) {
    const double o = b == 0 ? -1.0 : 1.0;
    z[b] = w + o * split.weight;
    out.predictive[b] = z[b] / (2.0 * w);
    live[b] = z[b] > 0.0;
    if (live[b] && g[0] > 0.0) mu[b] = branch_mean(base.cos2 + o * split.cos2, base.sin2 + o * split.sin2, z[b]);
  }
  // Keep the pair summing to one.
  out.predictive[0] = std::max(0.0, 1.0 - out.predictive[1]);

  std::array<double, 2> spread{};
  if (g[0] > 0.0) {
    const auto s = kt.split_spread(cols, mult, fr, mu[1], mu[0]);
    spread = {s[1], s[0]};
  }

  double ev = 0.0;
  for (int b = 0; b < 2; ++b) {
    if (!live[b]) continue;
    const double o = b == 0 ? -1.0 : 1.0;
    // p(o) * Var_o = (z_b / 2w) * (spread_b / z_b).
    double term = g[0] > 0.0 ? g[0] * spread[b] / (2.0 * w) : 0.0;
    double vis_term = 0.0;
    for (std::size_t j = 0; j < kNumControls; ++j) {
      const double gj = g[j + 1];
      if (!(gj > 0.0)) continue;
      double var;
      if (e.prior_exact(j)) {
        var = j == setting.index ? marginal_visibility_variance(o, c_bar) : kPriorVariance;
      } else {
        const double m1 = (base.vis[j] + o * split.vis[j]) / z[b];
        const double m2 = (base.vis_sq[j] + o * split.vis_sq[j]) / z[b];
        var = std::max(m2 - m1 * m1, 0.0);
      }
      vis_term += gj * var;
    }
    term += out.predictive[b] * vis_term;
    ev += term;
  }
  out.expected_variance = ev;
  return out;
}

kernels::Moments base_moments(const Ensemble& e) {
  return kernels::active().moments(e.columns(), kernels::Factor::uniform(1.0), nullptr);
}

}  // namespace

double predictive_probability(const Ensemble& ensemble, const ControlSetting& setting, Outcome outcome) {
  const auto& kt = kernels::active();
  const auto cols = ensemble.columns();
  const auto base = kt.moments(cols, kernels::Factor::uniform(1.0), nullptr);
  const auto split = kt.moments(cols, multiplier(ensemble, setting), ensemble.fringe_column(setting));
  const double p_plus = (base.weight + split.weight) / (2.0 * base.weight);
  return outcome == Outcome::Plus ? p_plus : 1.0 - p_plus;
}

double expected_variance(const Ensemble& ensemble, const ControlSetting& setting, const WeightMatrix& g) {
  return evaluate(ensemble, base_moments(ensemble), setting, g).expected_variance;
}

CandidateEvaluation evaluate_candidate(const Ensemble& ensemble, const ControlSetting& setting,
                                       const WeightMatrix& g) {
  return evaluate(ensemble, base_moments(ensemble), setting, g);
}

std::array<CandidateEvaluation, 2 * kNumControls> evaluate_candidates(const Ensemble& ensemble,
                                                                      const WeightMatrix& g) {
  const auto base = base_moments(ensemble);
  const auto settings = all_settings(ensemble.controls());
  std::array<CandidateEvaluation, 2 * kNumControls> out;
  for (std::size_t c = 0; c < settings.size(); ++c) out[c] = evaluate(ensemble, base, settings[c], g);
  return out;
}

ControlSetting greedy_select(const Ensemble& ensemble, const WeightMatrix& g) {
  const auto all = evaluate_candidates(ensemble, g);
  std::size_t best = 0;
  for (std::size_t c = 1; c < all.size(); ++c) {
    if (all[c].expected_variance < all[best].expected_variance) best = c;
  }
  return all[best].setting;
}

}  // namespace qrot
