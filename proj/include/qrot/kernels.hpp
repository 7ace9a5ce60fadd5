#pragma once

// Data-parallel inner loops over a particle ensemble stored column-wise.
//
// Every kernel exists as a scalar reference and, on x86-64, an AVX2 variant
// picked at runtime. Both variants accumulate in four interleaved lanes
// (particle k goes to lane k % 4, lanes are combined as (l0 + l1) + (l2 + l3),
// the tail n % 4 is added last in index order) and never contract a*b + c,
// so they return bitwise identical results.

#include <array>
#include <cstddef>
#include <string_view>

#include "qrot/core_model.hpp"

namespace qrot::kernels {

// Per-particle multiplier m_k: a column, or one constant for all particles.
struct Factor {
  const double* values = nullptr;
  double constant = 1.0;

  static Factor column(const double* v) { return Factor{v, 1.0}; }
  static Factor uniform(double c) { return Factor{nullptr, c}; }
};

// Sums of g_k * q_k with g_k = w_k * m_k * f_k for q in
// {1, cos 2theta, sin 2theta, V_i, V_i^2}.
struct Moments {
  double weight = 0.0;
  double cos2 = 0.0;
  double sin2 = 0.0;
  std::array<double, kNumControls> vis{};
  std::array<double, kNumControls> vis_sq{};
};

// Read-only view of the particle columns a kernel needs.
struct Columns {
  std::size_t n = 0;
  const double* weight = nullptr;
  const double* theta = nullptr;
  const double* cos2 = nullptr;
  const double* sin2 = nullptr;
  std::array<const double*, kNumControls> vis{};
};

struct KernelTable {
  std::string_view name;

  // fringe == nullptr means f_k = 1.
  Moments (*moments)(const Columns& c, Factor mult, const double* fringe);

  // {sum w (1 + m f) d(theta, mu_plus)^2, sum w (1 - m f) d(theta, mu_minus)^2}
  // where d is the signed difference on the circle of circumference pi.
  std::array<double, 2> (*split_spread)(const Columns& c, Factor mult, const double* fringe, double mu_plus,
                                        double mu_minus);

  // Weighted products of centred deviations, upper triangle row-major
  // (00, 01, .., 04, 11, .., 44). The angular deviation is wrapped.
  std::array<double, 15> (*central)(const Columns& c, const std::array<double, kNumParams>& mean);

  // w_k *= 1 + sign * m_k * f_k; returns the new sum of weights.
  double (*reweight)(std::size_t n, double* weight, Factor mult, const double* fringe, double sign);

  // w_k *= factor.
  void (*scale)(std::size_t n, double* weight, double factor);

  // {sum w, sum w^2}
  std::array<double, 2> (*sum_sq)(std::size_t n, const double* weight);
};

enum class Variant { Auto, Scalar, Avx2 };

const KernelTable& scalar();
// nullptr when the build or the CPU lacks AVX2.
const KernelTable* avx2();

// Kernels used by the library. Defaults to the best supported variant;
// QROT_KERNELS=scalar in the environment forces the reference path.
const KernelTable& active();
// Returns false if the requested variant is unavailable (selection unchanged).
bool select(Variant v);

}  // namespace qrot::kernels
