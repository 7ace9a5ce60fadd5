#pragma once

// Greedy one-step experiment design: for each of the 8 (control, basis)
// candidates, enumerate both outcomes exactly and pick the candidate whose
// expected posterior scalar variance Tr[G Cov] is smallest.

#include <array>

#include "qrot/core_model.hpp"
#include "qrot/particle_filter.hpp"
#include "qrot/weight_matrix.hpp"

namespace qrot {

struct CandidateEvaluation {
  ControlSetting setting;
  double expected_variance = 0.0;
  // Index 0: outcome -1, index 1: outcome +1.
  std::array<double, 2> predictive{};
};

// sum_k w_k p(outcome | setting, x_k). For a prior-exact visibility the
// likelihood is averaged over the uniform prior of that visibility.
double predictive_probability(const Ensemble& ensemble, const ControlSetting& setting, Outcome outcome);

// sum_o p(o) * scalar_variance(posterior after (setting, o)). The posterior
// mean is recomputed in each branch. The ensemble is not modified.
double expected_variance(const Ensemble& ensemble, const ControlSetting& setting, const WeightMatrix& g);

CandidateEvaluation evaluate_candidate(const Ensemble& ensemble, const ControlSetting& setting,
                                       const WeightMatrix& g);

// All 8 candidates in tie-break order (smaller s first, then B1).
std::array<CandidateEvaluation, 2 * kNumControls> evaluate_candidates(const Ensemble& ensemble,
                                                                      const WeightMatrix& g);

// Argmin of expected_variance; ties go to the earlier candidate.
ControlSetting greedy_select(const Ensemble& ensemble, const WeightMatrix& g);

}  // namespace qrot
