#include "qrot/weight_matrix.hpp"

#include <cmath>
#include <sstream>

#include "qrot/errors.hpp"

namespace qrot {

WeightMatrix::WeightMatrix(std::array<double, kNumParams> diag) : diag_(diag) {
  for (double g : diag_) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw ValidationError("weight matrix entries must be finite and >= 0");
  }
}

bool WeightMatrix::is_zero() const {
  for (double g : diag_) {
    if (g > 0.0) return false;
  }
  return true;
}

const WeightMatrix& WeightMatrix::require_nonzero() const {
  if (is_zero()) throw ValidationError("weight matrix needs at least one positive entry");
  return *this;
}

WeightMatrix WeightMatrix::parse(const std::string& selector) {
  std::array<double, kNumParams> d{};
  std::stringstream in(selector);
  std::string tok;
  while (std::getline(in, tok, '+')) {
    if (tok == "theta") {
      d[0] = 1;
    } else if (tok == "all") {
      d.fill(1);
    } else if (tok.size() == 2 && tok[0] == 'v' && tok[1] >= '1' && tok[1] <= '4') {
      d[static_cast<std::size_t>(tok[1] - '0')] = 1;
    } else {
      throw ValidationError("unknown weight selector '" + tok + "' (use theta, v1..v4, all)");
    }
  }
  WeightMatrix g(d);
  g.require_nonzero();
  return g;
}

WeightMatrix WeightMatrix::scaled(double c) const {
  if (!(c > 0.0)) throw ValidationError("scale must be positive");
  auto d = diag_;
  for (double& g : d) g *= c;
  return WeightMatrix(d);
}

std::string WeightMatrix::to_string() const {
  std::ostringstream out;
  out.precision(17);
  out << "diag(";
  for (std::size_t i = 0; i < kNumParams; ++i) out << (i ? "," : "") << diag_[i];
  out << ")";
  return out.str();
}

}  // namespace qrot
