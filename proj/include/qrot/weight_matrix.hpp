#pragma once

#include <array>
#include <string>

#include "qrot/core_model.hpp"

namespace qrot {

// Diagonal 5x5 weight matrix G. Entry 0 weights theta, entry i+1 weights V_i.
// A zero entry marks a nuisance parameter.
class WeightMatrix {
 public:
  // Throws ValidationError if an entry is negative or not finite. The zero
  // matrix is representable; campaign and bound code call require_nonzero().
  explicit WeightMatrix(std::array<double, kNumParams> diag);

  // Selector syntax: '+'-joined names from {theta, v1, v2, v3, v4, all},
  // e.g. "theta", "theta+v4". Each named parameter gets weight 1.
  static WeightMatrix parse(const std::string& selector);
  static WeightMatrix phase_only() { return WeightMatrix({1, 0, 0, 0, 0}); }

  static WeightMatrix zero() { return WeightMatrix({0, 0, 0, 0, 0}); }

  bool is_zero() const;
  // Throws ValidationError for the zero matrix.
  const WeightMatrix& require_nonzero() const;

  double operator[](std::size_t i) const { return diag_.at(i); }
  const std::array<double, kNumParams>& diag() const { return diag_; }
  WeightMatrix scaled(double c) const;
  std::string to_string() const;
  friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

 private:
  std::array<double, kNumParams> diag_;
};

}  // namespace qrot
