#include "qrot/core_model.hpp"

#include <algorithm>
#include <cmath>

#include "qrot/errors.hpp"

namespace qrot {

double wrap_angle(double theta) {
  double r = std::fmod(theta, kPi);
  if (r < 0.0) r += kPi;
  // fmod of a value just below a multiple of pi can land on pi after the shift.
  if (r >= kPi) r = 0.0;
  return r;
}

RotationAngle::RotationAngle(double value) : value_(value) {
  if (!(value >= 0.0 && value < kPi)) {
    throw ValidationError("rotation angle must lie in [0, pi), got " + std::to_string(value));
  }
}

Visibility::Visibility(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ValidationError("visibility must lie in [0, 1], got " + std::to_string(value));
  }
}

ParameterPoint ParameterPoint::make(double theta, std::array<double, kNumControls> vis) {
  ParameterPoint p;
  p.theta = RotationAngle(theta);
  for (std::size_t i = 0; i < kNumControls; ++i) p.visibilities[i] = Visibility(vis[i]);
  return p;
}

std::array<double, kNumParams> ParameterPoint::as_array() const {
  std::array<double, kNumParams> out{};
  out[0] = theta.value();
  for (std::size_t i = 0; i < kNumControls; ++i) out[i + 1] = visibilities[i].value();
  return out;
}

Outcome outcome_from_int(int value) {
  if (value == 1) return Outcome::Plus;
  if (value == -1) return Outcome::Minus;
  throw ValidationError("outcome must be -1 or +1, got " + std::to_string(value));
}

std::string to_string(Basis b) { return b == Basis::B1 ? "B1" : "B2"; }

Basis basis_from_string(const std::string& text) {
  if (text == "B1") return Basis::B1;
  if (text == "B2") return Basis::B2;
  throw ValidationError("basis must be B1 or B2, got '" + text + "'");
}

ControlSet::ControlSet(std::array<int, kNumControls> s) : s_(s) {
  for (std::size_t i = 0; i < kNumControls; ++i) {
    if (s_[i] < 1) throw ValidationError("control angular momentum must be positive");
    if (i > 0 && s_[i] <= s_[i - 1]) {
      throw ValidationError("control list must be strictly increasing");
    }
  }
}

std::size_t ControlSet::index_of(int s) const {
  const auto it = std::find(s_.begin(), s_.end(), s);
  if (it == s_.end()) throw ValidationError("s = " + std::to_string(s) + " is not an available control");
  return static_cast<std::size_t>(it - s_.begin());
}

ControlSetting ControlSetting::make(const ControlSet& controls, std::size_t index, Basis basis) {
  if (index >= kNumControls) throw ValidationError("control index out of range");
  return ControlSetting{index, controls.s(index), basis};
}

std::array<ControlSetting, 2 * kNumControls> all_settings(const ControlSet& controls) {
  std::array<ControlSetting, 2 * kNumControls> out;
  for (std::size_t i = 0; i < kNumControls; ++i) {
    out[2 * i] = ControlSetting::make(controls, i, Basis::B1);
    out[2 * i + 1] = ControlSetting::make(controls, i, Basis::B2);
  }
  return out;
}

void ResourceLedger::append(const ControlSetting& setting) {
  if (setting.index >= kNumControls || controls_.s(setting.index) != setting.s) {
    throw ValidationError("setting does not belong to the ledger's control set");
  }
  ++nu_[setting.index];
  total_ += setting.s;
  std::int64_t recomputed = 0;
  for (std::size_t i = 0; i < kNumControls; ++i) recomputed += nu_[i] * controls_.s(i);
  if (recomputed != total_) throw Error("resource ledger out of balance");
}

std::int64_t ResourceLedger::photons() const {
  std::int64_t k = 0;
  for (auto n : nu_) k += n;
  return k;
}

double fringe(const ControlSetting& setting, double theta) {
  const double phase = 2.0 * setting.s * theta;
  return setting.basis == Basis::B1 ? std::cos(phase) : std::sin(phase);
}

double likelihood(Outcome outcome, const ControlSetting& setting, const ParameterPoint& point) {
  const double contrast = point.visibility(setting.index) * fringe(setting, point.theta.value());
  const double p_plus = 0.5 * (1.0 + contrast);
  // 1 - p_plus keeps the pair summing to exactly one.
  return outcome == Outcome::Plus ? p_plus : 1.0 - p_plus;
}

Outcome sample_outcome(RngStream& rng, const ControlSetting& setting, const ParameterPoint& point) {
  const double p_plus = likelihood(Outcome::Plus, setting, point);
  return rng.uniform() < p_plus ? Outcome::Plus : Outcome::Minus;
}

std::int64_t resource_cost(std::span<const ExperimentRecord> records) {
  std::int64_t n = 0;
  for (const auto& r : records) n += r.setting.s;
  return n;
}

}  // namespace qrot
