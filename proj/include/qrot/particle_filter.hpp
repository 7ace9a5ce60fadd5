#pragma once

// Weighted particle approximation of the posterior over (theta, V_1..V_4).
//
// theta lives on a circle of circumference pi (the likelihood is pi-periodic
// and the prior covers [0, pi)), so its mean is half the argument of
// sum_k w_k exp(2 i theta_k) and deviations are wrapped into [-pi/2, pi/2].
//
// Prior-exact visibilities: while no record has involved control i, the
// posterior marginal of V_i is exactly the uniform prior and independent of
// the other coordinates. Ensembles built by init_prior track this per
// coordinate and report the exact prior moments (mean 1/2, variance 1/12,
// no correlation) instead of the Monte Carlo ones. Ensembles built from
// explicit particles treat every coordinate as empirical.

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "qrot/core_model.hpp"
#include "qrot/kernels.hpp"
#include "qrot/rng.hpp"
#include "qrot/weight_matrix.hpp"

namespace qrot {

inline constexpr std::size_t kDefaultParticles = 5000;
inline constexpr double kDefaultShrinkage = 0.98;
inline constexpr double kDefaultResampleThreshold = 0.5;
inline constexpr double kMinResultant = 1e-12;

class Ensemble {
 public:
  Ensemble() = default;

  // Weights are normalized; they must be non-negative with a positive sum.
  static Ensemble from_particles(std::span<const ParameterPoint> particles, std::span<const double> weights,
                                 const ControlSet& controls = {});
  static Ensemble from_particles(std::span<const ParameterPoint> particles, const ControlSet& controls = {});

  std::size_t size() const { return theta_.size(); }
  const ControlSet& controls() const { return controls_; }
  std::span<const double> weights() const { return weight_; }
  std::span<const double> theta() const { return theta_; }
  std::span<const double> visibility(std::size_t i) const { return vis_.at(i); }
  ParameterPoint particle(std::size_t k) const;

  bool prior_exact(std::size_t i) const { return prior_exact_.at(i); }
  // Cached cos 2 s theta_k (B1) or sin 2 s theta_k (B2) for the setting.
  const double* fringe_column(const ControlSetting& setting) const;
  kernels::Columns columns() const;

 private:
  friend Ensemble init_prior(std::size_t, RngStream&, const ControlSet&);
  friend void bayes_update(Ensemble&, const ExperimentRecord&);
  friend void resample(Ensemble&, RngStream&, double);
  friend Ensemble read_snapshot(std::istream&, const ControlSet&);

  void resize(std::size_t n);
  void refresh_trig();

  ControlSet controls_;
  std::vector<double> theta_;
  std::vector<double> weight_;
  std::vector<double> cos2_;
  std::vector<double> sin2_;
  std::array<std::vector<double>, kNumControls> vis_;
  std::array<std::vector<double>, 2 * kNumControls> fringe_;
  std::array<bool, kNumControls> prior_exact_{};
};

struct PosteriorSummary {
  ParameterPoint mean;
  Eigen::Matrix<double, 5, 5> covariance = Eigen::Matrix<double, 5, 5>::Zero();
  double scalar_variance = 0.0;
};

// n_p particles i.i.d. from the uniform prior on [0, pi) x [0, 1]^4 with
// weights 1/n_p. Throws ValidationError for n_p < 2.
Ensemble init_prior(std::size_t n_p, RngStream& rng, const ControlSet& controls = {});

// Multiply each weight by the record's likelihood and renormalize. Falls back
// to log-space evaluation on underflow; throws DegeneratePosterior (leaving
// the ensemble unchanged) if every weight still vanishes.
void bayes_update(Ensemble& ensemble, const ExperimentRecord& record);

// Weighted circular mean of theta in [0, pi). Throws UndefinedMean when the
// mean resultant length is below kMinResultant.
RotationAngle circular_mean(const Ensemble& ensemble);

// Posterior mean only (circular mean for theta, weighted means for V).
ParameterPoint point_estimate(const Ensemble& ensemble);

PosteriorSummary summarize(const Ensemble& ensemble, const WeightMatrix& g);

// 1 / sum w^2.
double effective_sample_size(const Ensemble& ensemble);

// Liu-West rejuvenation: systematic draw of parents by weight, shrink towards
// the mean by `shrinkage`, add Gaussian noise with covariance
// (1 - shrinkage^2) Cov. theta is moved along the shortest wrapped path and
// re-wrapped; visibilities are reflected into [0, 1]. Prior-exact
// visibilities are redrawn from the prior. Weights become 1/n_p.
void resample(Ensemble& ensemble, RngStream& rng, double shrinkage = kDefaultShrinkage);

// Columnar text: header "theta,v1,v2,v3,v4,w" then one particle per line.
// Prior-exact coordinates are listed on a leading "# prior_exact=" line.
void write_snapshot(std::ostream& out, const Ensemble& ensemble);
Ensemble read_snapshot(std::istream& in, const ControlSet& controls = {});

}  // namespace qrot
