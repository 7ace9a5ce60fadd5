#pragma once

// Frequency-based visibility estimator and the bundled reference table.
//
// With nu photons per basis, f0 the frequency of o = +1 in B1 and f_plus the
// frequency of o = +1 in B2,
//
//   V^2 ~ (nu [(2 f0 - 1)^2 + (2 f_plus - 1)^2] - 1) / (nu - 1)
//
// is unbiased for V^2 under the fringe model.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "qrot/core_model.hpp"

namespace qrot {

struct FrequencyRecord {
  double f0 = 0.5;
  double f_plus = 0.5;
  std::int64_t nu = 2;

  // Throws ValidationError unless both frequencies lie in [0, 1] and nu >= 2.
  void validate() const;
};

struct VisibilityEstimate {
  Visibility value;
  bool clipped = false;  // radicand fell outside [0, 1]
};

VisibilityEstimate visibility_estimate(const FrequencyRecord& record);

// Binomial draw of both frequencies at `point` for control `index`.
FrequencyRecord simulate_frequencies(RngStream& rng, const ParameterPoint& point, std::size_t index,
                                     std::int64_t nu, const ControlSet& controls = {});

struct ReferenceTable {
  std::vector<ParameterPoint> angles;                // one per measured angle
  std::array<double, kNumControls> mean_visibility{};  // "mean" row
};

// Eight angles with per-control visibilities plus the mean row.
const ReferenceTable& si_table();

// CSV with header row,theta,v1,v2,v3,v4; the row labelled "mean" has an
// empty theta. Throws ParseError on malformed lines.
ReferenceTable read_reference_table(std::istream& in);
ReferenceTable load_reference_table(const std::filesystem::path& path);

struct FrequencyRow {
  std::size_t angle_id = 0;
  int s = 1;
  FrequencyRecord record;
};

// CSV with header angle_id,s,f0,f_plus,nu.
std::vector<FrequencyRow> read_frequency_table(std::istream& in);

}  // namespace qrot
