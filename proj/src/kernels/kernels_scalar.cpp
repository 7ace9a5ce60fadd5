#include "kernels_impl.hpp"

namespace qrot::kernels {
namespace {

constexpr std::size_t kLanes = 4;

inline double lane_sum(const double (&a)[kLanes]) { return (a[0] + a[1]) + (a[2] + a[3]); }

inline double wrap(double x, double mu) {
  double d = x - mu;
  const double r = std::nearbyint(d / kPi);
  d = d - kPi * r;
  return d;
}

template <bool HasMult, bool HasFringe>
inline double gain(const Columns& c, Factor mult, const double* fringe, std::size_t k) {
  double g = c.weight[k];
  if constexpr (HasMult) g = g * mult.values[k];
  else g = g * mult.constant;
  if constexpr (HasFringe) g = g * fringe[k];
  return g;
}

template <bool HasMult, bool HasFringe>
Moments moments_impl(const Columns& c, Factor mult, const double* fringe) {
  constexpr std::size_t kQ = 3 + 2 * kNumControls;
  double acc[kQ][kLanes] = {};
  const std::size_t body = c.n - c.n % kLanes;

  auto accumulate = [&](std::size_t k, double* slot, std::size_t stride) {
    const double g = gain<HasMult, HasFringe>(c, mult, fringe, k);
    slot[0 * stride] += g;
    slot[1 * stride] += g * c.cos2[k];
    slot[2 * stride] += g * c.sin2[k];
    for (std::size_t i = 0; i < kNumControls; ++i) {
      const double gv = g * c.vis[i][k];
      slot[(3 + i) * stride] += gv;
      slot[(3 + kNumControls + i) * stride] += gv * c.vis[i][k];
    }
  };

  for (std::size_t k = 0; k < body; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) accumulate(k + l, &acc[0][l], kLanes);
  }
  double total[kQ];
  for (std::size_t q = 0; q < kQ; ++q) total[q] = lane_sum(acc[q]);
  for (std::size_t k = body; k < c.n; ++k) accumulate(k, total, 1);

  Moments m;
  m.weight = total[0];
  m.cos2 = total[1];
  m.sin2 = total[2];
  for (std::size_t i = 0; i < kNumControls; ++i) {
    m.vis[i] = total[3 + i];
    m.vis_sq[i] = total[3 + kNumControls + i];
  }
  return m;
}

Moments moments(const Columns& c, Factor mult, const double* fringe) {
  if (mult.values) {
    return fringe ? moments_impl<true, true>(c, mult, fringe) : moments_impl<true, false>(c, mult, fringe);
  }
  return fringe ? moments_impl<false, true>(c, mult, fringe) : moments_impl<false, false>(c, mult, fringe);
}

std::array<double, 2> split_spread(const Columns& c, Factor mult, const double* fringe, double mu_plus,
                                   double mu_minus) {
  double acc_p[kLanes] = {};
  double acc_m[kLanes] = {};
  const std::size_t body = c.n - c.n % kLanes;

  auto terms = [&](std::size_t k, double& p, double& m) {
    double t = mult.values ? mult.values[k] : mult.constant;
    t = t * fringe[k];
    const double dp = wrap(c.theta[k], mu_plus);
    const double dm = wrap(c.theta[k], mu_minus);
    double a = c.weight[k] * (1.0 + t);
    double b = c.weight[k] * (1.0 - t);
    a = a * dp;
    b = b * dm;
    p += a * dp;
    m += b * dm;
  };

  for (std::size_t k = 0; k < body; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) terms(k + l, acc_p[l], acc_m[l]);
  }
  double p = lane_sum(acc_p);
  double m = lane_sum(acc_m);
  for (std::size_t k = body; k < c.n; ++k) terms(k, p, m);
  return {p, m};
}

std::array<double, 15> central(const Columns& c, const std::array<double, kNumParams>& mean) {
  double acc[15][kLanes] = {};
  const std::size_t body = c.n - c.n % kLanes;

  auto terms = [&](std::size_t k, double* slot, std::size_t stride) {
    double d[kNumParams];
    d[0] = wrap(c.theta[k], mean[0]);
    for (std::size_t i = 0; i < kNumControls; ++i) d[i + 1] = c.vis[i][k] - mean[i + 1];
    std::size_t q = 0;
    for (std::size_t a = 0; a < kNumParams; ++a) {
      for (std::size_t b = a; b < kNumParams; ++b, ++q) {
        double p = d[a] * d[b];
        p = c.weight[k] * p;
        slot[q * stride] += p;
      }
    }
  };

  for (std::size_t k = 0; k < body; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) terms(k + l, &acc[0][l], kLanes);
  }
  std::array<double, 15> out{};
  for (std::size_t q = 0; q < 15; ++q) out[q] = lane_sum(acc[q]);
  for (std::size_t k = body; k < c.n; ++k) terms(k, out.data(), 1);
  return out;
}

double reweight(std::size_t n, double* weight, Factor mult, const double* fringe, double sign) {
  double acc[kLanes] = {};
  const std::size_t body = n - n % kLanes;

  auto step = [&](std::size_t k) {
    double t = mult.values ? mult.values[k] : mult.constant;
    t = t * fringe[k];
    t = sign * t;
    weight[k] = weight[k] * (1.0 + t);
    return weight[k];
  };

  for (std::size_t k = 0; k < body; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += step(k + l);
  }
  double total = lane_sum(acc);
  for (std::size_t k = body; k < n; ++k) total += step(k);
  return total;
}

void scale(std::size_t n, double* weight, double factor) {
  for (std::size_t k = 0; k < n; ++k) weight[k] = weight[k] * factor;
}

std::array<double, 2> sum_sq(std::size_t n, const double* weight) {
  double s[kLanes] = {};
  double q[kLanes] = {};
  const std::size_t body = n - n % kLanes;
  for (std::size_t k = 0; k < body; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      s[l] += weight[k + l];
      q[l] += weight[k + l] * weight[k + l];
    }
  }
  double ts = lane_sum(s);
  double tq = lane_sum(q);
  for (std::size_t k = body; k < n; ++k) {
    ts += weight[k];
    tq += weight[k] * weight[k];
  }
  return {ts, tq};
}

}  // namespace

const KernelTable kScalarKernels{"scalar", &moments, &split_spread, &central, &reweight, &scale, &sum_sq};

}  // namespace qrot::kernels
