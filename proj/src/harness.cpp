#include "qrot/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "qrot/errors.hpp"
#include "qrot/experiment_design.hpp"

namespace qrot {
namespace {

constexpr std::uint64_t kBootstrapStream = 0xB0075;

struct Window {
  std::int64_t index = 0;
  std::vector<double> values;  // one per run index, ordered by run id
  std::size_t sample_count = 0;
};

std::int64_t window_of(std::int64_t n, std::int64_t width, std::int64_t min_n) { return (n - min_n - 1) / width; }

double window_center(std::int64_t k, std::int64_t width, std::int64_t min_n) {
  return static_cast<double>(min_n + k * width) + 0.5 * static_cast<double>(width);
}

// Per-window values across run indices, before any median is taken.
std::vector<Window> aligned_windows(const std::vector<PrecisionSample>& samples, std::int64_t width,
                                    std::int64_t min_n) {
  if (width < 1) throw ValidationError("cluster width must be at least 1");
  // (run, angle) -> samples in emission order.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const PrecisionSample*>> series;
  std::map<std::size_t, bool> angle_ids;
  for (const auto& s : samples) {
    if (!(s.delta_sq >= 0.0)) throw ValidationError("precision sample must be non-negative");
    series[{s.run_id, s.angle_id}].push_back(&s);
    angle_ids[s.angle_id] = true;
  }
  const std::size_t n_angles = angle_ids.size();

  // (window, run) -> (sum over angles, angle count)
  std::map<std::int64_t, std::map<std::size_t, std::pair<double, std::size_t>>> cells;
  std::map<std::int64_t, std::size_t> counts;
  for (auto& [key, list] : series) {
    std::stable_sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->n < b->n; });
    std::optional<double> last;
    std::int64_t next_window = 0;
    std::size_t i = 0;
    while (i < list.size()) {
      if (list[i]->n <= min_n) {
        last = list[i]->delta_sq;
        ++i;
        continue;
      }
      const std::int64_t k = window_of(list[i]->n, width, min_n);
      for (; next_window < k; ++next_window) {
        if (last) {
          auto& c = cells[next_window][key.first];
          c.first += *last;
          c.second += 1;
        }
      }
      double sum = 0.0;
      std::size_t m = 0;
      while (i < list.size() && window_of(list[i]->n, width, min_n) == k) {
        sum += list[i]->delta_sq;
        last = list[i]->delta_sq;
        ++m;
        ++i;
      }
      counts[k] += m;
      auto& c = cells[k][key.first];
      c.first += sum / static_cast<double>(m);
      c.second += 1;
      next_window = k + 1;
    }
  }

  std::vector<Window> out;
  for (const auto& [k, runs] : cells) {
    Window w;
    w.index = k;
    w.sample_count = counts.count(k) ? counts.at(k) : 0;
    for (const auto& [run, acc] : runs) {
      if (acc.second == n_angles) w.values.push_back(acc.first / static_cast<double>(n_angles));
    }
    if (w.sample_count == 0 || w.values.empty()) continue;
    out.push_back(std::move(w));
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

CampaignResult collect(const CampaignConfig& config, std::vector<RunResult>& results) {
  CampaignResult out;
  std::vector<PrecisionSample> kept;
  std::map<std::int64_t, std::array<std::size_t, kNumControls>> usage;
  for (auto& r : results) {
    out.ledger_violations += count_ledger_violations(r);
    if (r.failure != RunFailure::None) {
      out.failures.push_back({r.record.angle_id, r.record.run_id, r.failure, r.failure_message});
    } else {
      kept.insert(kept.end(), r.samples.begin(), r.samples.end());
      for (std::size_t i = 0; i < r.samples.size(); ++i) {
        if (r.samples[i].n <= config.cluster_min_n) continue;
        usage[window_of(r.samples[i].n, config.cluster_width, config.cluster_min_n)]
             [r.record.records[i].setting.index] += 1;
      }
    }
    out.records.push_back(std::move(r.record));
  }

  const auto windows = aligned_windows(kept, config.cluster_width, config.cluster_min_n);
  for (const auto& w : windows) {
    CurveRow row;
    row.n_center = window_center(w.index, config.cluster_width, config.cluster_min_n);
    row.median = median(w.values);
    row.sample_count = w.sample_count;
    row.runs = w.values.size();
    if (w.values.size() >= 2) {
      std::tie(row.ci_low, row.ci_high) =
          bootstrap_ci(w.values, config.bootstrap_resamples, config.confidence,
                       derive_seed(config.seed, static_cast<std::uint64_t>(w.index), kBootstrapStream));
    } else {
      row.ci_low = row.ci_high = row.median;
    }
    out.curve.rows.push_back(row);
  }
  for (const auto& [k, counts] : usage) {
    UsageRow row;
    row.n_center = window_center(k, config.cluster_width, config.cluster_min_n);
    row.photons = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    for (std::size_t i = 0; i < kNumControls; ++i) {
      row.share[i] = static_cast<double>(counts[i]) / static_cast<double>(row.photons);
    }
    out.usage.push_back(row);
  }
  return out;
}

template <class Task>
std::vector<RunResult> run_all(const CampaignConfig& config, Task task) {
  const std::size_t total = config.angles() * config.runs;
  std::vector<RunResult> results(total);
  unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, total));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t t = next++; t < total; t = next++) results[t] = task(t / config.runs, t % config.runs);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return results;
}

}  // namespace

void CampaignConfig::validate() const {
  if (true_points.empty()) throw ValidationError("true_points: need at least one angle");
  if (runs < 1) throw ValidationError("runs: must be at least 1");
  if (particles < 2) throw ValidationError("particles: must be at least 2");
  if (budget < 1) throw ValidationError("budget: must be at least 1");
  if (photon_cap < 0) throw ValidationError("photon_cap: must be non-negative");
  if (cluster_width < 1) throw ValidationError("cluster_width: must be at least 1");
  if (cluster_min_n < 0) throw ValidationError("cluster_min_n: must be non-negative");
  if (bootstrap_resamples < 1) throw ValidationError("bootstrap_resamples: must be at least 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("confidence: must lie in (0, 1)");
  if (!(resample_threshold >= 0.0 && resample_threshold <= 1.0)) {
    throw ValidationError("resample_threshold: must lie in [0, 1]");
  }
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw ValidationError("shrinkage: must lie in (0, 1]");
  if (g.is_zero()) throw ValidationError("weights: at least one parameter must be weighted");
}

std::string to_string(RunFailure f) {
  switch (f) {
    case RunFailure::None:
      return "none";
    case RunFailure::DegeneratePosterior:
      return "degenerate-posterior";
    case RunFailure::UndefinedMean:
      return "undefined-mean";
    case RunFailure::PoolExhausted:
      return "pool-exhausted";
  }
  return "unknown";
}

double weighted_error(const ParameterPoint& estimate, const ParameterPoint& truth, const WeightMatrix& g) {
  const double d = wrapped_difference(estimate.theta.value(), truth.theta.value());
  double err = g[0] * d * d;
  for (std::size_t i = 0; i < kNumControls; ++i) {
    const double dv = estimate.visibility(i) - truth.visibility(i);
    err += g[i + 1] * dv * dv;
  }
  return err;
}

std::uint64_t outcome_seed(std::uint64_t seed, std::size_t angle_id, std::size_t run_id) {
  return derive_seed(seed, angle_id, run_id, 0);
}

std::uint64_t filter_seed(std::uint64_t seed, std::size_t angle_id, std::size_t run_id) {
  return derive_seed(seed, angle_id, run_id, 1);
}

RunResult run_estimation(const CampaignConfig& config, std::size_t angle_id, std::size_t run_id,
                         const OutcomeSource& source, bool keep_estimates) {
  if (angle_id >= config.angles()) throw ValidationError("angle_id out of range");
  const ParameterPoint& truth = config.true_points[angle_id];
  RunResult out;
  out.record.seed = config.seed;
  out.record.angle_id = angle_id;
  out.record.run_id = run_id;
  out.record.truth = truth;

  RngStream rng(filter_seed(config.seed, angle_id, run_id));
  Ensemble ensemble = init_prior(config.particles, rng, config.controls);
  ResourceLedger ledger(config.controls);
  const double ess_floor = config.resample_threshold * static_cast<double>(config.particles);

  while (ledger.total() < config.budget &&
         (config.photon_cap == 0 || static_cast<std::int64_t>(ledger.photons()) < config.photon_cap)) {
    try {
      const ControlSetting setting = greedy_select(ensemble, config.g);
      const ExperimentRecord rec{setting, source(setting)};
      bayes_update(ensemble, rec);
      ledger.append(setting);
      out.record.records.push_back(rec);
      if (effective_sample_size(ensemble) < ess_floor) resample(ensemble, rng, config.shrinkage);
      const ParameterPoint est = point_estimate(ensemble);
      out.samples.push_back({weighted_error(est, truth, config.g), ledger.total(), run_id, angle_id});
      if (keep_estimates) out.estimates.push_back(est);
    } catch (const PoolExhausted& e) {
      out.failure = RunFailure::PoolExhausted;
      out.failure_message = e.what();
      break;
    } catch (const DegeneratePosterior& e) {
      out.failure = RunFailure::DegeneratePosterior;
      out.failure_message = e.what();
      break;
    } catch (const UndefinedMean& e) {
      out.failure = RunFailure::UndefinedMean;
      out.failure_message = e.what();
      break;
    }
  }
  return out;
}

RunResult run_estimation(const CampaignConfig& config, std::size_t angle_id, std::size_t run_id,
                         bool keep_estimates) {
  if (angle_id >= config.angles()) throw ValidationError("angle_id out of range");
  RngStream outcomes(outcome_seed(config.seed, angle_id, run_id));
  const ParameterPoint truth = config.true_points[angle_id];
  return run_estimation(
      config, angle_id, run_id,
      [&](const ControlSetting& setting) { return sample_outcome(outcomes, setting, truth); }, keep_estimates);
}

ClusteredCurve cluster(const std::vector<PrecisionSample>& samples, std::int64_t width, std::int64_t min_n) {
  ClusteredCurve curve;
  for (const auto& w : aligned_windows(samples, width, min_n)) {
    const double m = median(w.values);
    curve.rows.push_back({window_center(w.index, width, min_n), m, m, m, w.sample_count, w.values.size()});
  }
  return curve;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  return 0.5 * (*std::max_element(values.begin(), mid) + *mid);
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& values, std::size_t resamples, double confidence,
                                       std::uint64_t seed) {
  if (values.size() < 2) throw UndefinedInterval("bootstrap needs at least two values");
  if (resamples < 1) throw ValidationError("need at least one bootstrap resample");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("confidence must lie in (0, 1)");
  RngStream rng(seed);
  std::vector<double> medians(resamples);
  std::vector<double> draw(values.size());
  for (auto& m : medians) {
    for (auto& d : draw) d = values[rng.index(values.size())];
    m = median(draw);
  }
  std::sort(medians.begin(), medians.end());
  const double alpha = 0.5 * (1.0 - confidence);
  const double centre = median(values);
  return {std::min(quantile_sorted(medians, alpha), centre), std::max(quantile_sorted(medians, 1.0 - alpha), centre)};
}

std::size_t count_ledger_violations(const RunResult& run) {
  std::size_t bad = run.samples.size() > run.record.records.size() ? run.samples.size() - run.record.records.size() : 0;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < std::min(run.samples.size(), run.record.records.size()); ++i) {
    total += run.record.records[i].setting.s;
    if (run.samples[i].n != total) ++bad;
  }
  return bad;
}

CampaignResult run_campaign(const CampaignConfig& config) {
  config.validate();
  auto results = run_all(config, [&](std::size_t a, std::size_t r) { return run_estimation(config, a, r); });
  return collect(config, results);
}

CampaignResult run_campaign(const CampaignConfig& config, const ReplayLibrary& replay) {
  config.validate();
  auto results = run_all(config, [&](std::size_t a, std::size_t r) {
    ReplayPool pool = replay.pool_for(a, r, config.runs);
    return run_estimation(config, a, r,
                          [&](const ControlSetting& setting) { return pool.next_outcome(a, setting); });
  });
  return collect(config, results);
}

}  // namespace qrot
