#pragma once

// Parameter space, controls and measurement model of the rotation sensor.
//
// A photon prepared with angular momentum s and measured in one of two
// polarization bases returns o = +1 or o = -1 with
//
//   p(o | B1) = (1 + o V_s cos 2s theta) / 2
//   p(o | B2) = (1 + o V_s sin 2s theta) / 2
//
// where theta in [0, pi) is the rotation angle and V_s in [0, 1] the fringe
// visibility of control s. Using control s costs s resources.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrot/rng.hpp"

namespace qrot {

inline constexpr double kPi = std::numbers::pi;
inline constexpr std::size_t kNumControls = 4;
inline constexpr std::size_t kNumParams = kNumControls + 1;

// Wrap any real into [0, pi).
double wrap_angle(double theta);

// Signed difference x - mu on the circle of circumference pi, in [-pi/2, pi/2].
inline double wrapped_difference(double x, double mu) {
  const double d = x - mu;
  return d - kPi * std::nearbyint(d / kPi);
}

class RotationAngle {
 public:
  RotationAngle() = default;
  // Throws ValidationError unless 0 <= value < pi.
  explicit RotationAngle(double value);
  static RotationAngle wrapped(double value) { return RotationAngle(wrap_angle(value)); }
  double value() const noexcept { return value_; }
  friend bool operator==(const RotationAngle&, const RotationAngle&) = default;

 private:
  double value_ = 0.0;
};

class Visibility {
 public:
  Visibility() = default;
  // Throws ValidationError unless 0 <= value <= 1.
  explicit Visibility(double value);
  double value() const noexcept { return value_; }
  friend bool operator==(const Visibility&, const Visibility&) = default;

 private:
  double value_ = 0.0;
};

// (theta, V_1 .. V_4); visibility i belongs to control index i.
struct ParameterPoint {
  RotationAngle theta;
  std::array<Visibility, kNumControls> visibilities;

  static ParameterPoint make(double theta, std::array<double, kNumControls> vis);
  double visibility(std::size_t i) const { return visibilities.at(i).value(); }
  // Flat (theta, V_1..V_4) view used by moment code.
  std::array<double, kNumParams> as_array() const;
  friend bool operator==(const ParameterPoint&, const ParameterPoint&) = default;
};

enum class Basis : std::uint8_t { B1 = 0, B2 = 1 };

enum class Outcome : int { Minus = -1, Plus = 1 };

inline int sign(Outcome o) { return static_cast<int>(o); }
Outcome outcome_from_int(int value);
std::string to_string(Basis b);
Basis basis_from_string(const std::string& text);

// Angular momenta of the available controls, ordered by index. The hardware
// of the reference experiment offers s = 1, 2, 11, 51.
class ControlSet {
 public:
  ControlSet() : s_{1, 2, 11, 51} {}
  explicit ControlSet(std::array<int, kNumControls> s);

  int s(std::size_t index) const { return s_.at(index); }
  const std::array<int, kNumControls>& values() const { return s_; }
  // Index of control with angular momentum s; throws ValidationError if absent.
  std::size_t index_of(int s) const;
  friend bool operator==(const ControlSet&, const ControlSet&) = default;

 private:
  std::array<int, kNumControls> s_;
};

struct ControlSetting {
  std::size_t index = 0;  // 0-based control index
  int s = 1;
  Basis basis = Basis::B1;

  static ControlSetting make(const ControlSet& controls, std::size_t index, Basis basis);
  friend bool operator==(const ControlSetting&, const ControlSetting&) = default;
};

// All (index, basis) pairs in tie-break order: smaller s first, then B1.
std::array<ControlSetting, 2 * kNumControls> all_settings(const ControlSet& controls);

struct ExperimentRecord {
  ControlSetting setting;
  Outcome outcome = Outcome::Plus;
  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

// Uses per control and the resource total N = sum_i nu_i s_i. The total is
// recomputed from the counts after each append and checked.
class ResourceLedger {
 public:
  ResourceLedger() = default;
  explicit ResourceLedger(const ControlSet& controls) : controls_(controls) {}

  void append(const ControlSetting& setting);
  const std::array<std::int64_t, kNumControls>& uses() const { return nu_; }
  std::int64_t total() const { return total_; }
  std::int64_t photons() const;

 private:
  ControlSet controls_;
  std::array<std::int64_t, kNumControls> nu_{};
  std::int64_t total_ = 0;
};

struct RunRecord {
  std::vector<ExperimentRecord> records;
  std::optional<ParameterPoint> truth;
  std::uint64_t seed = 0;
  std::size_t angle_id = 0;
  std::size_t run_id = 0;

  std::size_t photons() const { return records.size(); }
  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// Outcome probability for one photon. p(+1) + p(-1) == 1 exactly.
double likelihood(Outcome outcome, const ControlSetting& setting, const ParameterPoint& point);

// Fringe value cos 2s theta (B1) or sin 2s theta (B2).
double fringe(const ControlSetting& setting, double theta);

// Draw one outcome: +1 when a uniform draw falls below p(+1).
Outcome sample_outcome(RngStream& rng, const ControlSetting& setting, const ParameterPoint& point);

// Sum of s over the records.
std::int64_t resource_cost(std::span<const ExperimentRecord> records);
inline std::int64_t resource_cost(const RunRecord& run) { return resource_cost(run.records); }

}  // namespace qrot
