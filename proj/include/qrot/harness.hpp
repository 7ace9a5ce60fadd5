#pragma once

// Estimation campaigns: M runs at each of J true angles, per-photon precision
// samples, clustering into resource windows and the median figure of merit
// with bootstrap intervals.
//
// Windows are (min_n + k dn, min_n + (k + 1) dn] with centre min_n + k dn + dn/2.
// Inside one run a window takes the mean of its samples; a window the run
// jumped over (a single photon can cost more than dn) inherits the last value
// before it. Per run index the J angle values are averaged, and the median is
// taken over run indices.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qrot/core_model.hpp"
#include "qrot/particle_filter.hpp"
#include "qrot/records.hpp"
#include "qrot/weight_matrix.hpp"

namespace qrot {

struct CampaignConfig {
  std::vector<ParameterPoint> true_points;  // J angles
  std::size_t runs = 200;                   // M
  std::size_t particles = kDefaultParticles;
  std::int64_t budget = 5000;       // N_max
  std::int64_t photon_cap = 0;      // K_max; 0 means no cap beyond the budget
  WeightMatrix g = WeightMatrix::phase_only();
  std::uint64_t seed = 0;
  std::int64_t cluster_width = 50;
  std::int64_t cluster_min_n = 100;
  std::size_t bootstrap_resamples = 10000;
  double confidence = 0.99;
  ControlSet controls;
  double resample_threshold = kDefaultResampleThreshold;
  double shrinkage = kDefaultShrinkage;
  unsigned threads = 0;  // 0: hardware concurrency

  std::size_t angles() const { return true_points.size(); }
  // Throws ValidationError naming the offending field.
  void validate() const;
};

struct PrecisionSample {
  double delta_sq = 0.0;
  std::int64_t n = 0;
  std::size_t run_id = 0;
  std::size_t angle_id = 0;
};

struct CurveRow {
  double n_center = 0.0;
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t sample_count = 0;  // raw samples inside the window
  std::size_t runs = 0;          // run indices entering the median
};

struct ClusteredCurve {
  std::vector<CurveRow> rows;
};

enum class RunFailure { None, DegeneratePosterior, UndefinedMean, PoolExhausted };
std::string to_string(RunFailure f);

struct RunResult {
  RunRecord record;
  std::vector<PrecisionSample> samples;
  // Point estimate after each photon, kept only when requested.
  std::vector<ParameterPoint> estimates;
  RunFailure failure = RunFailure::None;
  std::string failure_message;
};

// Supplies the outcome of the photon about to be used.
using OutcomeSource = std::function<Outcome(const ControlSetting&)>;

// G-weighted squared error; the angle uses the wrapped difference.
double weighted_error(const ParameterPoint& estimate, const ParameterPoint& truth, const WeightMatrix& g);

// Seeds: outcomes draw from derive_seed(seed, angle, run, 0), the filter from
// derive_seed(seed, angle, run, 1).
std::uint64_t outcome_seed(std::uint64_t seed, std::size_t angle_id, std::size_t run_id);
std::uint64_t filter_seed(std::uint64_t seed, std::size_t angle_id, std::size_t run_id);

// One adaptive run until the budget or the photon cap is reached. A failing
// run keeps the samples collected so far and reports the failure.
RunResult run_estimation(const CampaignConfig& config, std::size_t angle_id, std::size_t run_id,
                         const OutcomeSource& source, bool keep_estimates = false);
// Simulator source at true_points[angle_id].
RunResult run_estimation(const CampaignConfig& config, std::size_t angle_id, std::size_t run_id,
                         bool keep_estimates = false);

// Samples with n <= min_n are dropped. Rows have ci_low = ci_high = median.
ClusteredCurve cluster(const std::vector<PrecisionSample>& samples, std::int64_t width, std::int64_t min_n);

// Percentile bootstrap of the median. The interval is widened if needed so
// that it contains the sample median. Throws UndefinedInterval for < 2 values.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values, std::size_t resamples, double confidence,
                                       std::uint64_t seed);

double median(std::vector<double> values);

struct UsageRow {
  double n_center = 0.0;
  std::array<double, kNumControls> share{};  // photon fractions per control
  std::size_t photons = 0;
};

struct FailureCount {
  std::size_t angle_id = 0;
  std::size_t run_id = 0;
  RunFailure failure = RunFailure::None;
  std::string message;
};

struct CampaignResult {
  ClusteredCurve curve;
  std::vector<UsageRow> usage;
  std::vector<FailureCount> failures;
  std::vector<RunRecord> records;  // ordered by (angle_id, run_id)
  std::size_t ledger_violations = 0;
};

// Runs all J x M runs on config.threads workers. Runs listed as failed are
// left out of the curve and the usage table.
CampaignResult run_campaign(const CampaignConfig& config);
CampaignResult run_campaign(const CampaignConfig& config, const ReplayLibrary& replay);

// Recomputed sum of s at every sample against the emitted n; returns the
// number of mismatches.
std::size_t count_ledger_violations(const RunResult& run);

}  // namespace qrot
