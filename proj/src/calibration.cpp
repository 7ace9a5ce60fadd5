#include "qrot/calibration.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "qrot/errors.hpp"

namespace qrot {
namespace {

constexpr const char* kSiTable =
    "row,theta,v1,v2,v3,v4\n"
    "1,0.00235,0.8776,0.9091,0.8445,0.7038\n"
    "2,0.06145,0.9085,0.8934,0.8007,0.7611\n"
    "3,0.38000,0.9399,0.9153,0.7936,0.7222\n"
    "4,0.49620,0.9211,0.9315,0.7261,0.8186\n"
    "5,1.6645,0.9331,0.8914,0.8691,0.7312\n"
    "6,1.8750,0.9599,0.9081,0.8762,0.6618\n"
    "7,2.5900,0.9187,0.9587,0.8775,0.6848\n"
    "8,2.9600,0.8986,0.9321,0.8700,0.7528\n"
    "mean,,0.9197,0.9174,0.8322,0.7295\n";

void expect_header(std::istream& in, std::size_t& line_no, std::string_view header) {
  std::string line;
  if (!csv::next_line(in, line, line_no)) throw ParseError("empty table");
  if (line != header) throw ParseError("expected header '" + std::string(header) + "'", line_no);
}

}  // namespace

void FrequencyRecord::validate() const {
  if (nu < 2) throw ValidationError("nu must be at least 2, got " + std::to_string(nu));
  if (!(f0 >= 0.0 && f0 <= 1.0)) throw ValidationError("f0 outside [0, 1]");
  if (!(f_plus >= 0.0 && f_plus <= 1.0)) throw ValidationError("f_plus outside [0, 1]");
}

VisibilityEstimate visibility_estimate(const FrequencyRecord& record) {
  record.validate();
  const double a = 2.0 * record.f0 - 1.0;
  const double b = 2.0 * record.f_plus - 1.0;
  const double nu = static_cast<double>(record.nu);
  const double radicand = (nu * (a * a + b * b) - 1.0) / (nu - 1.0);
  if (radicand < 0.0) return {Visibility(0.0), true};
  if (radicand > 1.0) return {Visibility(1.0), true};
  return {Visibility(std::sqrt(radicand)), false};
}

FrequencyRecord simulate_frequencies(RngStream& rng, const ParameterPoint& point, std::size_t index,
                                     std::int64_t nu, const ControlSet& controls) {
  if (nu < 2) throw ValidationError("nu must be at least 2");
  std::array<std::int64_t, 2> plus{};
  for (Basis basis : {Basis::B1, Basis::B2}) {
    const auto setting = ControlSetting::make(controls, index, basis);
    for (std::int64_t k = 0; k < nu; ++k) {
      if (sample_outcome(rng, setting, point) == Outcome::Plus) ++plus[static_cast<std::size_t>(basis)];
    }
  }
  const double n = static_cast<double>(nu);
  return {plus[0] / n, plus[1] / n, nu};
}

const ReferenceTable& si_table() {
  static const ReferenceTable table = [] {
    std::istringstream in(kSiTable);
    return read_reference_table(in);
  }();
  return table;
}

ReferenceTable read_reference_table(std::istream& in) {
  std::size_t line_no = 0;
  expect_header(in, line_no, "row,theta,v1,v2,v3,v4");
  ReferenceTable table;
  bool have_mean = false;
  std::string line;
  while (csv::next_line(in, line, line_no)) {
    const auto f = csv::split(line);
    if (f.size() != 6) throw ParseError("expected 6 fields", line_no);
    std::array<double, kNumControls> v{};
    for (std::size_t i = 0; i < kNumControls; ++i) {
      v[i] = csv::to_double(f[i + 2], line_no, "visibility");
      if (!(v[i] >= 0.0 && v[i] <= 1.0)) throw ParseError("visibility outside [0, 1]", line_no);
    }
    if (f[0] == "mean") {
      if (have_mean) throw ParseError("duplicate mean row", line_no);
      table.mean_visibility = v;
      have_mean = true;
      continue;
    }
    const double theta = csv::to_double(f[1], line_no, "theta");
    if (!(theta >= 0.0 && theta < kPi)) throw ParseError("theta outside [0, pi)", line_no);
    table.angles.push_back(ParameterPoint::make(theta, v));
  }
  if (table.angles.empty()) throw ParseError("table has no angle rows");
  if (!have_mean) {
    for (const auto& p : table.angles) {
      for (std::size_t i = 0; i < kNumControls; ++i) table.mean_visibility[i] += p.visibility(i);
    }
    for (auto& m : table.mean_visibility) m /= static_cast<double>(table.angles.size());
  }
  return table;
}

ReferenceTable load_reference_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open reference table " + path.string());
  return read_reference_table(in);
}

std::vector<FrequencyRow> read_frequency_table(std::istream& in) {
  std::size_t line_no = 0;
  expect_header(in, line_no, "angle_id,s,f0,f_plus,nu");
  std::vector<FrequencyRow> rows;
  std::string line;
  while (csv::next_line(in, line, line_no)) {
    const auto f = csv::split(line);
    if (f.size() != 5) throw ParseError("expected 5 fields", line_no);
    FrequencyRow row;
    const auto angle = csv::to_int(f[0], line_no, "angle_id");
    if (angle < 0) throw ParseError("negative angle_id", line_no);
    row.angle_id = static_cast<std::size_t>(angle);
    row.s = static_cast<int>(csv::to_int(f[1], line_no, "s"));
    row.record = {csv::to_double(f[2], line_no, "f0"), csv::to_double(f[3], line_no, "f_plus"),
                  csv::to_int(f[4], line_no, "nu")};
    try {
      row.record.validate();
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qrot
