#include "qrot/particle_filter.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cfloat>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "qrot/errors.hpp"

namespace qrot {
namespace {

constexpr double kPriorMean = 0.5;
constexpr double kPriorVariance = 1.0 / 12.0;

double reflect_unit(double x) {
  for (int i = 0; i < 8 && (x < 0.0 || x > 1.0); ++i) {
    if (x < 0.0) x = -x;
    if (x > 1.0) x = 2.0 - x;
  }
  return std::clamp(x, 0.0, 1.0);
}

std::size_t upper_index(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  // Row-major upper triangle of a 5x5 matrix.
  return a * kNumParams - a * (a - 1) / 2 + (b - a);
}

double circular_mean_from(double sum_cos2, double sum_sin2, double sum_w) {
  const double resultant = std::hypot(sum_cos2, sum_sin2);
  if (!(resultant > kMinResultant * sum_w)) {
    throw UndefinedMean("circular mean undefined: resultant length below threshold");
  }
  return wrap_angle(0.5 * std::atan2(sum_sin2, sum_cos2));
}

struct RawMoments {
  std::array<double, kNumParams> mean{};
  double weight = 0.0;
};

RawMoments raw_moments(const Ensemble& e) {
  const auto m = kernels::active().moments(e.columns(), kernels::Factor::uniform(1.0), nullptr);
  RawMoments r;
  r.weight = m.weight;
  r.mean[0] = circular_mean_from(m.cos2, m.sin2, m.weight);
  for (std::size_t i = 0; i < kNumControls; ++i) {
    r.mean[i + 1] = e.prior_exact(i) ? kPriorMean : std::clamp(m.vis[i] / m.weight, 0.0, 1.0);
  }
  return r;
}

Eigen::Matrix<double, 5, 5> covariance_about(const Ensemble& e, const std::array<double, kNumParams>& mean,
                                             double weight) {
  const auto products = kernels::active().central(e.columns(), mean);
  Eigen::Matrix<double, 5, 5> cov;
  for (std::size_t a = 0; a < kNumParams; ++a) {
    for (std::size_t b = 0; b < kNumParams; ++b) cov(a, b) = products[upper_index(a, b)] / weight;
  }
  for (std::size_t i = 0; i < kNumControls; ++i) {
    if (!e.prior_exact(i)) continue;
    cov.row(i + 1).setZero();
    cov.col(i + 1).setZero();
    cov(i + 1, i + 1) = kPriorVariance;
  }
  return cov;
}

}  // namespace

Ensemble Ensemble::from_particles(std::span<const ParameterPoint> particles, std::span<const double> weights,
                                  const ControlSet& controls) {
  if (particles.size() != weights.size()) throw ValidationError("particle and weight counts differ");
  if (particles.empty()) throw ValidationError("ensemble needs at least one particle");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("weights must have a positive sum");

  Ensemble e;
  e.controls_ = controls;
  e.resize(particles.size());
  for (std::size_t k = 0; k < particles.size(); ++k) {
    e.theta_[k] = particles[k].theta.value();
    for (std::size_t i = 0; i < kNumControls; ++i) e.vis_[i][k] = particles[k].visibility(i);
    e.weight_[k] = weights[k] / total;
  }
  e.prior_exact_.fill(false);
  e.refresh_trig();
  return e;
}

Ensemble Ensemble::from_particles(std::span<const ParameterPoint> particles, const ControlSet& controls) {
  std::vector<double> w(particles.size(), 1.0);
  return from_particles(particles, w, controls);
}

ParameterPoint Ensemble::particle(std::size_t k) const {
  return ParameterPoint::make(theta_.at(k), {vis_[0][k], vis_[1][k], vis_[2][k], vis_[3][k]});
}

const double* Ensemble::fringe_column(const ControlSetting& setting) const {
  return fringe_.at(2 * setting.index + static_cast<std::size_t>(setting.basis)).data();
}

kernels::Columns Ensemble::columns() const {
  kernels::Columns c;
  c.n = size();
  c.weight = weight_.data();
  c.theta = theta_.data();
  c.cos2 = cos2_.data();
  c.sin2 = sin2_.data();
  for (std::size_t i = 0; i < kNumControls; ++i) c.vis[i] = vis_[i].data();
  return c;
}

void Ensemble::resize(std::size_t n) {
  theta_.assign(n, 0.0);
  weight_.assign(n, 0.0);
  cos2_.assign(n, 0.0);
  sin2_.assign(n, 0.0);
  for (auto& v : vis_) v.assign(n, 0.0);
  for (auto& f : fringe_) f.assign(n, 0.0);
}

void Ensemble::refresh_trig() {
  for (std::size_t k = 0; k < theta_.size(); ++k) {
    cos2_[k] = std::cos(2.0 * theta_[k]);
    sin2_[k] = std::sin(2.0 * theta_[k]);
    for (std::size_t i = 0; i < kNumControls; ++i) {
      const double phase = 2.0 * controls_.s(i) * theta_[k];
      fringe_[2 * i][k] = std::cos(phase);
      fringe_[2 * i + 1][k] = std::sin(phase);
    }
  }
}

Ensemble init_prior(std::size_t n_p, RngStream& rng, const ControlSet& controls) {
  if (n_p < 2) throw ValidationError("particle count must be at least 2");
  Ensemble e;
  e.controls_ = controls;
  e.resize(n_p);
  const double w = 1.0 / static_cast<double>(n_p);
  for (std::size_t k = 0; k < n_p; ++k) {
    e.theta_[k] = wrap_angle(kPi * rng.uniform());
    for (std::size_t i = 0; i < kNumControls; ++i) e.vis_[i][k] = rng.uniform();
    e.weight_[k] = w;
  }
  e.prior_exact_.fill(true);
  e.refresh_trig();
  return e;
}

void bayes_update(Ensemble& ensemble, const ExperimentRecord& record) {
  const auto& kt = kernels::active();
  const ControlSetting& setting = record.setting;
  if (setting.index >= kNumControls || ensemble.controls_.s(setting.index) != setting.s) {
    throw ValidationError("record setting does not match the ensemble's control set");
  }
  const std::size_t n = ensemble.size();
  const double* vis = ensemble.vis_[setting.index].data();
  const double* fr = ensemble.fringe_column(setting);
  const double o = sign(record.outcome);

  std::vector<double> previous = ensemble.weight_;
  double total = kt.reweight(n, ensemble.weight_.data(), kernels::Factor::column(vis), fr, o);

  if (!(total >= DBL_MIN) || !std::isfinite(total)) {
    // Log-space retry: shift by the largest log-weight before exponentiating.
    std::vector<double> logw(n);
    double top = -HUGE_VAL;
    for (std::size_t k = 0; k < n; ++k) {
      const double lik = 0.5 * (1.0 + o * vis[k] * fr[k]);
      logw[k] = (previous[k] > 0.0 && lik > 0.0) ? std::log(previous[k]) + std::log(lik) : -HUGE_VAL;
      top = std::max(top, logw[k]);
    }
    if (!std::isfinite(top)) {
      ensemble.weight_ = std::move(previous);
      throw DegeneratePosterior("all particle weights vanished after the update");
    }
    total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      ensemble.weight_[k] = std::exp(logw[k] - top);
      total += ensemble.weight_[k];
    }
  }
  kt.scale(n, ensemble.weight_.data(), 1.0 / total);
  ensemble.prior_exact_[setting.index] = false;
}

RotationAngle circular_mean(const Ensemble& ensemble) {
  const auto m = kernels::active().moments(ensemble.columns(), kernels::Factor::uniform(1.0), nullptr);
  return RotationAngle(circular_mean_from(m.cos2, m.sin2, m.weight));
}

ParameterPoint point_estimate(const Ensemble& ensemble) {
  const auto r = raw_moments(ensemble);
  return ParameterPoint::make(r.mean[0], {r.mean[1], r.mean[2], r.mean[3], r.mean[4]});
}

PosteriorSummary summarize(const Ensemble& ensemble, const WeightMatrix& g) {
  const auto r = raw_moments(ensemble);
  PosteriorSummary s;
  s.mean = ParameterPoint::make(r.mean[0], {r.mean[1], r.mean[2], r.mean[3], r.mean[4]});
  s.covariance = covariance_about(ensemble, r.mean, r.weight);
  double var = 0.0;
  for (std::size_t a = 0; a < kNumParams; ++a) var += g[a] * s.covariance(a, a);
  s.scalar_variance = var;
  return s;
}

double effective_sample_size(const Ensemble& ensemble) {
  const auto s = kernels::active().sum_sq(ensemble.size(), ensemble.weights().data());
  return s[0] * s[0] / s[1];
}

void resample(Ensemble& ensemble, RngStream& rng, double shrinkage) {
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw ValidationError("shrinkage must lie in (0, 1]");
  const std::size_t n = ensemble.size();
  const auto r = raw_moments(ensemble);
  const auto cov = covariance_about(ensemble, r.mean, r.weight);

  std::vector<std::size_t> active{0};
  for (std::size_t i = 0; i < kNumControls; ++i) {
    if (!ensemble.prior_exact(i)) active.push_back(i + 1);
  }
  const auto dim = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd sub(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    for (Eigen::Index b = 0; b < dim; ++b) sub(a, b) = cov(active[a], active[b]);
  }
  sub *= (1.0 - shrinkage * shrinkage);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd factor = eig.eigenvectors() * root.asDiagonal();

  // Systematic selection of parents.
  std::vector<std::size_t> parent(n);
  {
    const double step = 1.0 / static_cast<double>(n);
    double u = rng.uniform() * step;
    double cumulative = ensemble.weight_[0];
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) {
      while (u > cumulative && k + 1 < n) cumulative += ensemble.weight_[++k];
      parent[j] = k;
      u += step;
    }
  }

  std::vector<double> theta(n);
  std::array<std::vector<double>, kNumControls> vis;
  for (auto& v : vis) v.resize(n);
  Eigen::VectorXd z(dim);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t p = parent[j];
    for (Eigen::Index a = 0; a < dim; ++a) z(a) = rng.normal();
    const Eigen::VectorXd noise = factor * z;
    const double d = wrapped_difference(ensemble.theta_[p], r.mean[0]);
    theta[j] = wrap_angle(r.mean[0] + shrinkage * d + noise(0));
    Eigen::Index a = 1;
    for (std::size_t i = 0; i < kNumControls; ++i) {
      if (ensemble.prior_exact(i)) {
        vis[i][j] = rng.uniform();
      } else {
        const double moved = shrinkage * ensemble.vis_[i][p] + (1.0 - shrinkage) * r.mean[i + 1] + noise(a++);
        vis[i][j] = reflect_unit(moved);
      }
    }
  }

  ensemble.theta_ = std::move(theta);
  ensemble.vis_ = std::move(vis);
  std::fill(ensemble.weight_.begin(), ensemble.weight_.end(), 1.0 / static_cast<double>(n));
  ensemble.refresh_trig();
}

void write_snapshot(std::ostream& out, const Ensemble& ensemble) {
  out << "# prior_exact=";
  for (std::size_t i = 0; i < kNumControls; ++i) out << (i ? "," : "") << (ensemble.prior_exact(i) ? 1 : 0);
  out << "\ntheta,v1,v2,v3,v4,w\n";
  std::ostringstream line;
  line.precision(17);
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    line.str("");
    line << ensemble.theta()[k];
    for (std::size_t i = 0; i < kNumControls; ++i) line << ',' << ensemble.visibility(i)[k];
    line << ',' << ensemble.weights()[k] << '\n';
    out << line.str();
  }
}

Ensemble read_snapshot(std::istream& in, const ControlSet& controls) {
  std::string line;
  std::size_t line_no = 0;
  std::array<bool, kNumControls> prior_exact{};
  bool header_seen = false;
  std::vector<ParameterPoint> particles;
  std::vector<double> weights;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# prior_exact=", 0) == 0) {
      std::stringstream flags(line.substr(14));
      std::string tok;
      for (std::size_t i = 0; i < kNumControls; ++i) {
        if (!std::getline(flags, tok, ',') || (tok != "0" && tok != "1")) {
          throw ParseError("bad prior_exact flags", line_no);
        }
        prior_exact[i] = tok == "1";
      }
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {
      if (line != "theta,v1,v2,v3,v4,w") throw ParseError("expected header theta,v1,v2,v3,v4,w", line_no);
      header_seen = true;
      continue;
    }
    std::stringstream fields(line);
    std::array<double, kNumParams + 1> v{};
    std::string tok;
    for (std::size_t f = 0; f < v.size(); ++f) {
      if (!std::getline(fields, tok, ',')) throw ParseError("expected 6 columns", line_no);
      try {
        std::size_t used = 0;
        v[f] = std::stod(tok, &used);
        if (used != tok.size()) throw ParseError("trailing characters in number", line_no);
      } catch (const std::logic_error&) {
        throw ParseError("not a number: '" + tok + "'", line_no);
      }
    }
    if (std::getline(fields, tok, ',')) throw ParseError("expected 6 columns", line_no);
    try {
      particles.push_back(ParameterPoint::make(v[0], {v[1], v[2], v[3], v[4]}));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    weights.push_back(v[5]);
  }
  if (!header_seen) throw ParseError("missing snapshot header");
  Ensemble e = Ensemble::from_particles(particles, weights, controls);
  e.prior_exact_ = prior_exact;
  return e;
}

}  // namespace qrot
