#include "qrot/records.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "csv.hpp"
#include "qrot/errors.hpp"

namespace qrot {
namespace {

ExperimentRecord parse_record(std::string_view line, std::size_t line_no, const ControlSet& controls) {
  const auto f = csv::split(line);
  if (f.size() != 3) throw ParseError("expected s,basis,outcome", line_no);
  try {
    const auto s = static_cast<int>(csv::to_int(f[0], line_no, "s"));
    const Basis basis = basis_from_string(std::string(f[1]));
    const auto o = f[2] == "+1" ? 1 : csv::to_int(f[2], line_no, "outcome");
    return {ControlSetting::make(controls, controls.index_of(s), basis), outcome_from_int(static_cast<int>(o))};
  } catch (const ParseError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line_no);
  }
}

}  // namespace

void write_run_record(std::ostream& out, const RunRecord& run) {
  out << "# seed=" << run.seed << '\n';
  out << "# angle_id=" << run.angle_id << '\n';
  out << "# run_id=" << run.run_id << '\n';
  if (run.truth) {
    const auto a = run.truth->as_array();
    out << "# truth=" << std::setprecision(17);
    for (std::size_t i = 0; i < a.size(); ++i) out << (i ? "," : "") << a[i];
    out << '\n';
  }
  for (const auto& r : run.records) out << r.setting.s << ',' << to_string(r.setting.basis) << ',' << sign(r.outcome) << '\n';
}

RunRecord read_run_record(std::istream& in, const ControlSet& controls) {
  RunRecord run;
  std::string line;
  std::size_t line_no = 0;
  while (csv::next_line(in, line, line_no)) {
    if (line[0] != '#') {
      run.records.push_back(parse_record(line, line_no, controls));
      continue;
    }
    std::string_view body(line);
    body.remove_prefix(1);
    while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("metadata line needs key=value", line_no);
    const auto key = body.substr(0, eq);
    const auto value = body.substr(eq + 1);
    if (key == "seed") {
      const auto v = csv::to_int(value, line_no, "seed");
      run.seed = static_cast<std::uint64_t>(v);
    } else if (key == "angle_id") {
      run.angle_id = static_cast<std::size_t>(csv::to_int(value, line_no, "angle_id"));
    } else if (key == "run_id") {
      run.run_id = static_cast<std::size_t>(csv::to_int(value, line_no, "run_id"));
    } else if (key == "truth") {
      const auto f = csv::split(value);
      if (f.size() != kNumParams) throw ParseError("truth needs 5 values", line_no);
      std::array<double, kNumControls> v{};
      for (std::size_t i = 0; i < kNumControls; ++i) v[i] = csv::to_double(f[i + 1], line_no, "truth");
      try {
        run.truth = ParameterPoint::make(csv::to_double(f[0], line_no, "truth"), v);
      } catch (const ValidationError& e) {
        throw ParseError(e.what(), line_no);
      }
    } else {
      throw ParseError("unknown metadata key '" + std::string(key) + "'", line_no);
    }
  }
  return run;
}

void ReplayPool::push(std::size_t angle_id, int s, Basis basis, Outcome outcome) {
  queues_[{angle_id, s, basis}].outcomes.push_back(outcome);
}

Outcome ReplayPool::next_outcome(std::size_t angle_id, const ControlSetting& setting) {
  const auto it = queues_.find({angle_id, setting.s, setting.basis});
  if (it == queues_.end() || it->second.cursor >= it->second.outcomes.size()) {
    throw PoolExhausted("replay pool exhausted for angle " + std::to_string(angle_id) + ", s=" +
                        std::to_string(setting.s) + ", " + to_string(setting.basis));
  }
  return it->second.outcomes[it->second.cursor++];
}

std::size_t ReplayPool::remaining(std::size_t angle_id, int s, Basis basis) const {
  const auto it = queues_.find({angle_id, s, basis});
  return it == queues_.end() ? 0 : it->second.outcomes.size() - it->second.cursor;
}

std::size_t ReplayPool::total_remaining() const {
  std::size_t n = 0;
  for (const auto& [key, q] : queues_) n += q.outcomes.size() - q.cursor;
  return n;
}

ReplayLibrary ReplayLibrary::read_csv(std::istream& in, const ControlSet& controls) {
  ReplayLibrary lib;
  std::string line;
  std::size_t line_no = 0;
  if (!csv::next_line(in, line, line_no)) throw ParseError("empty replay pool");
  if (line == "angle_id,run_id,s,basis,outcome") {
    lib.explicit_ = true;
  } else if (line != "angle_id,s,basis,outcome") {
    throw ParseError("expected header angle_id,s,basis,outcome or angle_id,run_id,s,basis,outcome", line_no);
  }
  const std::size_t width = lib.explicit_ ? 5 : 4;
  while (csv::next_line(in, line, line_no)) {
    const auto f = csv::split(line);
    if (f.size() != width) throw ParseError("expected " + std::to_string(width) + " fields", line_no);
    const auto angle = csv::to_int(f[0], line_no, "angle_id");
    const auto run = lib.explicit_ ? csv::to_int(f[1], line_no, "run_id") : 0;
    if (angle < 0 || run < 0) throw ParseError("negative id", line_no);
    const std::size_t off = lib.explicit_ ? 2 : 1;
    std::string rec = std::string(f[off]) + ',' + std::string(f[off + 1]) + ',' + std::string(f[off + 2]);
    const auto r = parse_record(rec, line_no, controls);
    lib.by_run_[static_cast<std::size_t>(run)].push(static_cast<std::size_t>(angle), r.setting.s, r.setting.basis,
                                                      r.outcome);
  }
  return lib;
}

void ReplayLibrary::write_csv(std::ostream& out, std::span<const RunRecord> runs) {
  out << "angle_id,run_id,s,basis,outcome\n";
  for (const auto& run : runs) {
    for (const auto& r : run.records) {
      out << run.angle_id << ',' << run.run_id << ',' << r.setting.s << ',' << to_string(r.setting.basis) << ','
          << sign(r.outcome) << '\n';
    }
  }
}

ReplayPool ReplayLibrary::pool_for(std::size_t angle_id, std::size_t run_id, std::size_t runs) const {
  ReplayPool pool;
  if (explicit_) {
    const auto it = by_run_.find(run_id);
    if (it == by_run_.end()) return pool;
    for (const auto& [key, q] : it->second.queues_) {
      if (std::get<0>(key) == angle_id) pool.queues_[key].outcomes = q.outcomes;
    }
    return pool;
  }
  if (runs == 0 || run_id >= runs) throw ValidationError("run id outside the partition");
  const auto it = by_run_.find(0);
  if (it == by_run_.end()) return pool;
  for (const auto& [key, q] : it->second.queues_) {
    if (std::get<0>(key) != angle_id) continue;
    const std::size_t len = q.outcomes.size();
    const std::size_t lo = run_id * len / runs;
    const std::size_t hi = (run_id + 1) * len / runs;
    pool.queues_[key].outcomes.assign(q.outcomes.begin() + static_cast<std::ptrdiff_t>(lo),
                                      q.outcomes.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return pool;
}

}  // namespace qrot
