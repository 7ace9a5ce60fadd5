#pragma once

// Cramer-Rao style reference curves for the median error.
//
// Per-photon Fisher information of the fringe model with nu_i photons on
// control i, split evenly between the two bases; its average over a uniform
// theta; and the allocation-optimized constant
//
//   C_G = min_x Tr(G E_theta[I~]^-1)  subject to  sum_i s_i x_i = 1, x >= 0,
//
// which gives the median-error bound xi * C_G / N.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qrot/core_model.hpp"
#include "qrot/weight_matrix.hpp"

namespace qrot {

using FisherMatrix = Eigen::Matrix<double, 5, 5>;

// Symmetric and smallest eigenvalue >= -1e-8 * max |entry|.
bool is_valid_fisher(const FisherMatrix& m);

// Normalized uses per control; feasible when x >= 0 and sum s_i x_i = 1.
struct AllocationVector {
  std::array<double, kNumControls> x{};

  double resource_sum(const ControlSet& controls) const;
  bool feasible(const ControlSet& controls, double tol = 1e-10) const;
};

struct BoundSpec {
  double c_g = 0.0;
  double xi = 0.0;
  AllocationVector allocation;
};

// Closed-form FI at one theta. Throws SingularFormula when a control with
// nu_i > 0 has V_i outside (0, 1).
FisherMatrix fisher_matrix(const ParameterPoint& point, const std::array<double, kNumControls>& nu,
                           const ControlSet& controls = {});

// E_theta[I~]: diagonal, entries 4 sum_i x_i s_i^2 (1 - r_i) and
// x_i (1 - r_i) / (V_i^2 r_i) with r_i = sqrt(1 - V_i^2). Small V uses the
// series x_i (1/2 + 3V^2/8 + 5V^4/16). Throws SingularFormula when x_i > 0
// and V_i is outside (0, 1).
FisherMatrix averaged_fisher(const AllocationVector& x, const std::array<double, kNumControls>& visibilities,
                             const ControlSet& controls = {});

// Objective Tr(G E[I~]^-1) restricted to the G-weighted parameters; +inf when
// a weighted parameter has no information at x.
double allocation_objective(const WeightMatrix& g, const AllocationVector& x,
                            const std::array<double, kNumControls>& visibilities, const ControlSet& controls = {});

// Grid search (step 0.02 in y_i = s_i x_i) followed by pairwise coordinate
// descent. Visibilities are clamped to [1e-9, 1 - 1e-9]. Throws
// UnboundedObjective when theta is weighted and every visibility is zero.
BoundSpec solve_c_g(const WeightMatrix& g, const std::array<double, kNumControls>& visibilities,
                    const ControlSet& controls = {});

enum class XiMethod { ClosedForm, MonteCarlo };

// Median of Z^2 for standard normal Z, i.e. the squared 3/4 normal quantile.
double xi_closed_form();
// Median of scale * Z^2 over `draws` samples.
double xi_monte_carlo(std::uint64_t draws, std::uint64_t seed, double scale = 1.0);
double xi_constant(XiMethod method, std::uint64_t draws = 10'000'000, std::uint64_t seed = 1);

struct ReferenceRow {
  double n = 0.0;
  double bound = 0.0;  // xi C_G / N
  double sql = 0.0;    // 1 / N
  double hl = 0.0;     // pi^2 / N^2
};

std::vector<ReferenceRow> reference_curves(std::span<const double> n_grid, const BoundSpec& spec);
std::vector<ReferenceRow> reference_curves(std::span<const double> n_grid, const WeightMatrix& g,
                                           const std::array<double, kNumControls>& visibilities,
                                           const ControlSet& controls = {});

}  // namespace qrot
