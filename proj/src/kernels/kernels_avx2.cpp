// Compiled with -mavx2 only; callers reach these through the dispatch table
// after a CPU feature check. Tails and lane reductions repeat the scalar
// reference's operation order exactly.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace qrot::kernels {
namespace {

constexpr std::size_t kLanes = 4;

inline double lane_sum(__m256d v) {
  alignas(32) double a[kLanes];
  _mm256_store_pd(a, v);
  return (a[0] + a[1]) + (a[2] + a[3]);
}

inline __m256d wrap(__m256d x, __m256d mu, __m256d pi) {
  __m256d d = _mm256_sub_pd(x, mu);
  const __m256d r = _mm256_round_pd(_mm256_div_pd(d, pi), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  return _mm256_sub_pd(d, _mm256_mul_pd(pi, r));
}

inline double wrap(double x, double mu) {
  double d = x - mu;
  const double r = std::nearbyint(d / kPi);
  d = d - kPi * r;
  return d;
}

template <bool HasMult, bool HasFringe>
Moments moments_impl(const Columns& c, Factor mult, const double* fringe) {
  constexpr std::size_t kQ = 3 + 2 * kNumControls;
  __m256d acc[kQ];
  for (auto& a : acc) a = _mm256_setzero_pd();
  const __m256d cmult = _mm256_set1_pd(mult.constant);
  const std::size_t body = c.n - c.n % kLanes;

  for (std::size_t k = 0; k < body; k += kLanes) {
    __m256d g = _mm256_loadu_pd(c.weight + k);
    if constexpr (HasMult) g = _mm256_mul_pd(g, _mm256_loadu_pd(mult.values + k));
    else g = _mm256_mul_pd(g, cmult);
    if constexpr (HasFringe) g = _mm256_mul_pd(g, _mm256_loadu_pd(fringe + k));
    acc[0] = _mm256_add_pd(acc[0], g);
    acc[1] = _mm256_add_pd(acc[1], _mm256_mul_pd(g, _mm256_loadu_pd(c.cos2 + k)));
    acc[2] = _mm256_add_pd(acc[2], _mm256_mul_pd(g, _mm256_loadu_pd(c.sin2 + k)));
    for (std::size_t i = 0; i < kNumControls; ++i) {
      const __m256d v = _mm256_loadu_pd(c.vis[i] + k);
      const __m256d gv = _mm256_mul_pd(g, v);
      acc[3 + i] = _mm256_add_pd(acc[3 + i], gv);
      acc[3 + kNumControls + i] = _mm256_add_pd(acc[3 + kNumControls + i], _mm256_mul_pd(gv, v));
    }
  }

  double total[kQ];
  for (std::size_t q = 0; q < kQ; ++q) total[q] = lane_sum(acc[q]);
  for (std::size_t k = body; k < c.n; ++k) {
    double g = c.weight[k];
    if constexpr (HasMult) g = g * mult.values[k];
    else g = g * mult.constant;
    if constexpr (HasFringe) g = g * fringe[k];
    total[0] += g;
    total[1] += g * c.cos2[k];
    total[2] += g * c.sin2[k];
    for (std::size_t i = 0; i < kNumControls; ++i) {
      const double gv = g * c.vis[i][k];
      total[3 + i] += gv;
      total[3 + kNumControls + i] += gv * c.vis[i][k];
    }
  }

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
  const __m256d pi = _mm256_set1_pd(kPi);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d vmp = _mm256_set1_pd(mu_plus);
  const __m256d vmm = _mm256_set1_pd(mu_minus);
  const __m256d cmult = _mm256_set1_pd(mult.constant);
  __m256d acc_p = _mm256_setzero_pd();
  __m256d acc_m = _mm256_setzero_pd();
  const std::size_t body = c.n - c.n % kLanes;

  for (std::size_t k = 0; k < body; k += kLanes) {
    __m256d t = mult.values ? _mm256_loadu_pd(mult.values + k) : cmult;
    t = _mm256_mul_pd(t, _mm256_loadu_pd(fringe + k));
    const __m256d th = _mm256_loadu_pd(c.theta + k);
    const __m256d dp = wrap(th, vmp, pi);
    const __m256d dm = wrap(th, vmm, pi);
    const __m256d w = _mm256_loadu_pd(c.weight + k);
    __m256d a = _mm256_mul_pd(w, _mm256_add_pd(one, t));
    __m256d b = _mm256_mul_pd(w, _mm256_sub_pd(one, t));
    a = _mm256_mul_pd(a, dp);
    b = _mm256_mul_pd(b, dm);
    acc_p = _mm256_add_pd(acc_p, _mm256_mul_pd(a, dp));
    acc_m = _mm256_add_pd(acc_m, _mm256_mul_pd(b, dm));
  }

  double p = lane_sum(acc_p);
  double m = lane_sum(acc_m);
  for (std::size_t k = body; k < c.n; ++k) {
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
  }
  return {p, m};
}

std::array<double, 15> central(const Columns& c, const std::array<double, kNumParams>& mean) {
  const __m256d pi = _mm256_set1_pd(kPi);
  __m256d mu[kNumParams];
  for (std::size_t a = 0; a < kNumParams; ++a) mu[a] = _mm256_set1_pd(mean[a]);
  __m256d acc[15];
  for (auto& a : acc) a = _mm256_setzero_pd();
  const std::size_t body = c.n - c.n % kLanes;

  for (std::size_t k = 0; k < body; k += kLanes) {
    __m256d d[kNumParams];
    d[0] = wrap(_mm256_loadu_pd(c.theta + k), mu[0], pi);
    for (std::size_t i = 0; i < kNumControls; ++i) d[i + 1] = _mm256_sub_pd(_mm256_loadu_pd(c.vis[i] + k), mu[i + 1]);
    const __m256d w = _mm256_loadu_pd(c.weight + k);
    std::size_t q = 0;
    for (std::size_t a = 0; a < kNumParams; ++a) {
      for (std::size_t b = a; b < kNumParams; ++b, ++q) {
        acc[q] = _mm256_add_pd(acc[q], _mm256_mul_pd(w, _mm256_mul_pd(d[a], d[b])));
      }
    }
  }

  std::array<double, 15> out{};
  for (std::size_t q = 0; q < 15; ++q) out[q] = lane_sum(acc[q]);
  for (std::size_t k = body; k < c.n; ++k) {
    double d[kNumParams];
    d[0] = wrap(c.theta[k], mean[0]);
    for (std::size_t i = 0; i < kNumControls; ++i) d[i + 1] = c.vis[i][k] - mean[i + 1];
    std::size_t q = 0;
    for (std::size_t a = 0; a < kNumParams; ++a) {
      for (std::size_t b = a; b < kNumParams; ++b, ++q) {
        double p = d[a] * d[b];
        p = c.weight[k] * p;
        out[q] += p;
      }
    }
  }
  return out;
}

double reweight(std::size_t n, double* weight, Factor mult, const double* fringe, double sign) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d vsign = _mm256_set1_pd(sign);
  const __m256d cmult = _mm256_set1_pd(mult.constant);
  __m256d acc = _mm256_setzero_pd();
  const std::size_t body = n - n % kLanes;

  for (std::size_t k = 0; k < body; k += kLanes) {
    __m256d t = mult.values ? _mm256_loadu_pd(mult.values + k) : cmult;
    t = _mm256_mul_pd(t, _mm256_loadu_pd(fringe + k));
    t = _mm256_mul_pd(vsign, t);
    const __m256d w = _mm256_mul_pd(_mm256_loadu_pd(weight + k), _mm256_add_pd(one, t));
    _mm256_storeu_pd(weight + k, w);
    acc = _mm256_add_pd(acc, w);
  }

  double total = lane_sum(acc);
  for (std::size_t k = body; k < n; ++k) {
    double t = mult.values ? mult.values[k] : mult.constant;
    t = t * fringe[k];
    t = sign * t;
    weight[k] = weight[k] * (1.0 + t);
    total += weight[k];
  }
  return total;
}

void scale(std::size_t n, double* weight, double factor) {
  const __m256d f = _mm256_set1_pd(factor);
  const std::size_t body = n - n % kLanes;
  for (std::size_t k = 0; k < body; k += kLanes) {
    _mm256_storeu_pd(weight + k, _mm256_mul_pd(_mm256_loadu_pd(weight + k), f));
  }
  for (std::size_t k = body; k < n; ++k) weight[k] = weight[k] * factor;
}

std::array<double, 2> sum_sq(std::size_t n, const double* weight) {
  __m256d s = _mm256_setzero_pd();
  __m256d q = _mm256_setzero_pd();
  const std::size_t body = n - n % kLanes;
  for (std::size_t k = 0; k < body; k += kLanes) {
    const __m256d w = _mm256_loadu_pd(weight + k);
    s = _mm256_add_pd(s, w);
    q = _mm256_add_pd(q, _mm256_mul_pd(w, w));
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

const KernelTable kAvx2Kernels{"avx2", &moments, &split_spread, &central, &reweight, &scale, &sum_sq};

}  // namespace qrot::kernels
