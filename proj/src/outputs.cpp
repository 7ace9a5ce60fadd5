#include "qrot/outputs.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "qrot/config.hpp"
#include "qrot/errors.hpp"

namespace qrot {

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

void write_curve_csv(std::ostream& out, const ClusteredCurve& curve, std::size_t flagged) {
  out << "n_center,median,ci_low,ci_high,count,runs,flagged\n";
  for (const auto& r : curve.rows) {
    out << format_real(r.n_center) << ',' << format_real(r.median) << ',' << format_real(r.ci_low) << ','
        << format_real(r.ci_high) << ',' << r.sample_count << ',' << r.runs << ',' << flagged << '\n';
  }
}

void write_usage_csv(std::ostream& out, std::span<const UsageRow> usage, const ControlSet& controls) {
  out << "n_center";
  for (int s : controls.values()) out << ",share_s" << s;
  out << ",photons\n";
  for (const auto& r : usage) {
    out << format_real(r.n_center);
    for (double share : r.share) out << ',' << format_real(share);
    out << ',' << r.photons << '\n';
  }
}

void write_failures(std::ostream& out, std::span<const FailureCount> failures, std::size_t total_runs) {
  out << "flagged runs: " << failures.size() << " of " << total_runs << '\n';
  for (const auto& f : failures) {
    out << "angle " << f.angle_id << " run " << f.run_id << ": " << to_string(f.failure) << ": " << f.message
        << '\n';
  }
}

void write_bound_csv(std::ostream& out, std::span<const ReferenceRow> rows) {
  out << "N,bound,sql,hl\n";
  for (const auto& r : rows) {
    out << format_real(r.n) << ',' << format_real(r.bound) << ',' << format_real(r.sql) << ',' << format_real(r.hl)
        << '\n';
  }
}

void write_calibration_csv(std::ostream& out, std::span<const CalibrationRow> rows) {
  out << "angle_id,s,v_hat,clipped\n";
  for (const auto& r : rows) {
    out << r.angle_id << ',' << r.s << ',' << format_real(r.estimate.value.value()) << ','
        << (r.estimate.clipped ? 1 : 0) << '\n';
  }
}

void write_manifest(std::ostream& out, const std::string& command, std::uint64_t seed,
                    const std::string& resolved_config_json, const std::map<std::string, std::string>& extra) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = QROT_VERSION;
  j["seed"] = seed;
  j["config_hash"] = content_hash(resolved_config_json);
  for (const auto& [k, v] : extra) j[k] = v;
  j["config"] = nlohmann::json::parse(resolved_config_json);
  out << j.dump(2) << '\n';
}

void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream f(dir / name, std::ios::binary);
  f << text;
  if (!f) throw Error("cannot write " + (dir / name).string());
}

}  // namespace qrot
