#include "qrot/bounds.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>

#include "qrot/errors.hpp"
#include "qrot/rng.hpp"

namespace qrot {
namespace {

constexpr double kClampLow = 1e-9;
constexpr double kClampHigh = 1.0 - 1e-9;
constexpr double kSeriesBelow = 1e-4;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_open_unit(double v, const char* what) {
  if (!(v > 0.0 && v < 1.0)) {
    throw SingularFormula(std::string(what) + ": visibility " + std::to_string(v) +
                          " on the boundary of [0, 1]; clamp it or use the averaged bound");
  }
}

// 1 - sqrt(1 - V^2) without cancellation.
double one_minus_r(double v) { return v * v / (1.0 + std::sqrt(1.0 - v * v)); }

// Phase information per unit y = s x: 4 s (1 - r).
double phase_gain(int s, double v) { return 4.0 * s * one_minus_r(v); }

// Visibility information per unit x: (1 - r) / (V^2 r) = 1 / ((1 + r) r).
double visibility_gain(double v) {
  if (v < kSeriesBelow) {
    const double u = v * v;
    return 0.5 + 3.0 * u / 8.0 + 5.0 * u * u / 16.0;
  }
  const double r = std::sqrt(1.0 - v * v);
  return 1.0 / ((1.0 + r) * r);
}

struct Objective {
  std::array<double, kNumParams> g{};
  std::array<double, kNumControls> phase{};  // per unit y_i
  std::array<double, kNumControls> vis{};    // per unit y_i

  double operator()(const std::array<double, kNumControls>& y) const {
    double f = 0.0;
    if (g[0] > 0.0) {
      double info = 0.0;
      for (std::size_t i = 0; i < kNumControls; ++i) info += phase[i] * y[i];
      if (!(info > 0.0)) return kInf;
      f += g[0] / info;
    }
    for (std::size_t i = 0; i < kNumControls; ++i) {
      if (!(g[i + 1] > 0.0)) continue;
      const double info = vis[i] * y[i];
      if (!(info > 0.0)) return kInf;
      f += g[i + 1] / info;
    }
    return f;
  }
};

Objective make_objective(const WeightMatrix& g, const std::array<double, kNumControls>& visibilities,
                         const ControlSet& controls) {
  Objective obj;
  obj.g = g.diag();
  for (std::size_t i = 0; i < kNumControls; ++i) {
    const double v = std::clamp(visibilities[i], kClampLow, kClampHigh);
    obj.phase[i] = phase_gain(controls.s(i), v);
    obj.vis[i] = visibility_gain(v) / controls.s(i);
  }
  return obj;
}

// Minimize f(y + t (e_j - e_k)) over t in [-y_j, y_k] by golden section.
double line_minimize(const Objective& f, std::array<double, kNumControls>& y, std::size_t j, std::size_t k) {
  const double lo0 = -y[j];
  const double hi0 = y[k];
  if (!(hi0 - lo0 > 0.0)) return f(y);
  auto eval = [&](double t) {
    auto z = y;
    z[j] += t;
    z[k] -= t;
    if (t == lo0) z[j] = 0.0;
    if (t == hi0) z[k] = 0.0;
    return f(z);
  };
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = lo0, hi = hi0;
  double a = hi - ratio * (hi - lo);
  double b = lo + ratio * (hi - lo);
  double fa = eval(a), fb = eval(b);
  for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - ratio * (hi - lo);
      fa = eval(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + ratio * (hi - lo);
      fb = eval(b);
    }
  }
  // Compare the interior estimate with the current point and both ends.
  double best_t = 0.0;
  double best = eval(0.0);
  for (double t : {0.5 * (lo + hi), lo0, hi0}) {
    const double v = eval(t);
    if (v < best) {
      best = v;
      best_t = t;
    }
  }
  if (best_t != 0.0) {
    y[j] += best_t;
    y[k] -= best_t;
    if (best_t == lo0) y[j] = 0.0;
    if (best_t == hi0) y[k] = 0.0;
  }
  return best;
}

}  // namespace

bool is_valid_fisher(const FisherMatrix& m) {
  if (!(m - m.transpose()).isZero(0.0)) return false;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  Eigen::SelfAdjointEigenSolver<FisherMatrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -1e-8 * scale;
}

double AllocationVector::resource_sum(const ControlSet& controls) const {
  double total = 0.0;
  for (std::size_t i = 0; i < kNumControls; ++i) total += controls.s(i) * x[i];
  return total;
}

bool AllocationVector::feasible(const ControlSet& controls, double tol) const {
  for (double xi : x) {
    if (xi < 0.0) return false;
  }
  return std::abs(resource_sum(controls) - 1.0) <= tol;
}

FisherMatrix fisher_matrix(const ParameterPoint& point, const std::array<double, kNumControls>& nu,
                           const ControlSet& controls) {
  FisherMatrix m = FisherMatrix::Zero();
  const double theta = point.theta.value();
  for (std::size_t i = 0; i < kNumControls; ++i) {
    if (nu[i] < 0.0) throw ValidationError("negative use count");
    if (nu[i] == 0.0) continue;
    const double v = point.visibility(i);
    require_open_unit(v, "fisher_matrix");
    const double s = controls.s(i);
    const double v2 = v * v;
    // With phi = 2 s theta: q = sin^2 2phi, D = (1 - V^2 cos^2 phi)(1 - V^2 sin^2 phi).
    const double two_phi = 4.0 * s * theta;
    const double sin_2phi = std::sin(two_phi);
    const double cos_2phi = std::cos(two_phi);
    const double q = sin_2phi * sin_2phi;
    const double d = 1.0 - v2 + v2 * v2 * q / 4.0;
    m(0, 0) += 2.0 * nu[i] * s * s * v2 * (1.0 - v2 + v2 * q / 2.0) / d;
    const double cross = -nu[i] * s * v2 * v * sin_2phi * cos_2phi / (2.0 * d);
    m(0, i + 1) = cross;
    m(i + 1, 0) = cross;
    m(i + 1, i + 1) = 0.5 * nu[i] * (1.0 - v2 * q / 2.0) / d;
  }
  return m;
}

FisherMatrix averaged_fisher(const AllocationVector& x, const std::array<double, kNumControls>& visibilities,
                             const ControlSet& controls) {
  FisherMatrix m = FisherMatrix::Zero();
  for (std::size_t i = 0; i < kNumControls; ++i) {
    if (x.x[i] < 0.0) throw ValidationError("negative allocation");
    if (x.x[i] == 0.0) continue;
    const double v = visibilities[i];
    require_open_unit(v, "averaged_fisher");
    const int s = controls.s(i);
    m(0, 0) += x.x[i] * s * phase_gain(s, v);
    m(i + 1, i + 1) = x.x[i] * visibility_gain(v);
  }
  return m;
}

double allocation_objective(const WeightMatrix& g, const AllocationVector& x,
                            const std::array<double, kNumControls>& visibilities, const ControlSet& controls) {
  const Objective f = make_objective(g, visibilities, controls);
  std::array<double, kNumControls> y{};
  for (std::size_t i = 0; i < kNumControls; ++i) y[i] = controls.s(i) * x.x[i];
  return f(y);
}

BoundSpec solve_c_g(const WeightMatrix& g, const std::array<double, kNumControls>& visibilities,
                    const ControlSet& controls) {
  g.require_nonzero();
  for (double v : visibilities) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("visibilities must lie in [0, 1]");
  }
  if (g[0] > 0.0 && std::all_of(visibilities.begin(), visibilities.end(), [](double v) { return v == 0.0; })) {
    throw UnboundedObjective("theta is weighted but every visibility is zero: no phase information");
  }
  const Objective f = make_objective(g, visibilities, controls);

  // Coarse grid on the simplex sum y = 1 with step 1/50.
  constexpr int kSteps = 50;
  std::array<double, kNumControls> best_y{};
  double best = kInf;
  for (int a = 0; a <= kSteps; ++a) {
    for (int b = 0; a + b <= kSteps; ++b) {
      for (int c = 0; a + b + c <= kSteps; ++c) {
        const int d = kSteps - a - b - c;
        const std::array<double, kNumControls> y{a / double(kSteps), b / double(kSteps), c / double(kSteps),
                                                 d / double(kSteps)};
        const double v = f(y);
        if (v < best) {
          best = v;
          best_y = y;
        }
      }
    }
  }
  if (!std::isfinite(best)) throw UnboundedObjective("objective is infinite on the whole grid");

  // Pairwise coordinate descent until a full sweep gains less than 1e-15 relative.
  auto y = best_y;
  for (int sweep = 0; sweep < 5000; ++sweep) {
    const double before = best;
    for (std::size_t j = 0; j < kNumControls; ++j) {
      for (std::size_t k = j + 1; k < kNumControls; ++k) best = line_minimize(f, y, j, k);
    }
    if (before - best <= 1e-15 * best) break;
  }

  double total = 0.0;
  for (double v : y) total += v;
  BoundSpec spec;
  for (std::size_t i = 0; i < kNumControls; ++i) spec.allocation.x[i] = (y[i] / total) / controls.s(i);
  spec.c_g = f(y);
  spec.xi = xi_closed_form();
  return spec;
}

double xi_closed_form() {
  // Phi^-1(3/4) = sqrt(2) erfinv(1/2).
  const double z = std::sqrt(2.0) * boost::math::erf_inv(0.5);
  return z * z;
}

double xi_monte_carlo(std::uint64_t draws, std::uint64_t seed, double scale) {
  if (draws == 0) throw ValidationError("need at least one draw");
  RngStream rng(seed);
  std::vector<double> values(draws);
  for (auto& v : values) {
    const double z = rng.normal();
    v = scale * z * z;
  }
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(draws / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (draws % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

double xi_constant(XiMethod method, std::uint64_t draws, std::uint64_t seed) {
  return method == XiMethod::ClosedForm ? xi_closed_form() : xi_monte_carlo(draws, seed);
}

std::vector<ReferenceRow> reference_curves(std::span<const double> n_grid, const BoundSpec& spec) {
  std::vector<ReferenceRow> rows;
  rows.reserve(n_grid.size());
  for (double n : n_grid) {
    if (!(n > 0.0)) throw ValidationError("resource grid must be positive");
    rows.push_back({n, spec.xi * spec.c_g / n, 1.0 / n, kPi * kPi / (n * n)});
  }
  return rows;
}

std::vector<ReferenceRow> reference_curves(std::span<const double> n_grid, const WeightMatrix& g,
                                           const std::array<double, kNumControls>& visibilities,
                                           const ControlSet& controls) {
  return reference_curves(n_grid, solve_c_g(g, visibilities, controls));
}

}  // namespace qrot
