#pragma once

// CSV and manifest writers. Reals are printed in shortest round-trip form so
// that reruns are byte-identical and files parse back exactly.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>

#include "qrot/bounds.hpp"
#include "qrot/calibration.hpp"
#include "qrot/harness.hpp"

namespace qrot {

std::string format_real(double v);

// n_center,median,ci_low,ci_high,count,runs,flagged
void write_curve_csv(std::ostream& out, const ClusteredCurve& curve, std::size_t flagged);
// n_center,share_s<s>... for every control, plus photons
void write_usage_csv(std::ostream& out, std::span<const UsageRow> usage, const ControlSet& controls);
void write_failures(std::ostream& out, std::span<const FailureCount> failures, std::size_t total_runs);
// N,bound,sql,hl
void write_bound_csv(std::ostream& out, std::span<const ReferenceRow> rows);

struct CalibrationRow {
  std::size_t angle_id = 0;
  int s = 1;
  VisibilityEstimate estimate;
};
// angle_id,s,v_hat,clipped
void write_calibration_csv(std::ostream& out, std::span<const CalibrationRow> rows);

// JSON object with command, version, seed, config_hash, the resolved config
// and any extra string fields. No timestamps.
void write_manifest(std::ostream& out, const std::string& command, std::uint64_t seed,
                    const std::string& resolved_config_json, const std::map<std::string, std::string>& extra = {});

// Writes `text` to dir/name, creating dir. Throws Error on I/O failure.
void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text);

}  // namespace qrot
