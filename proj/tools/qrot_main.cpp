#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "qrot/bounds.hpp"
#include "qrot/calibration.hpp"
#include "qrot/config.hpp"
#include "qrot/errors.hpp"
#include "qrot/harness.hpp"
#include "qrot/outputs.hpp"

namespace {

constexpr int kValidationExit = 2;
constexpr int kRuntimeExit = 3;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::int64_t> budget;
  std::optional<unsigned> threads;
  std::string pool;
  std::string input;
  std::string weights;
  std::uint64_t draws = 10'000'000;
};

qrot::CampaignConfig load_campaign(const Options& o) {
  auto c = qrot::parse_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.runs) c.runs = *o.runs;
  if (o.budget) c.budget = *o.budget;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

template <class F>
std::string to_text(F&& write) {
  std::ostringstream ss;
  write(ss);
  return ss.str();
}

void emit_campaign(const Options& o, const std::string& command, const qrot::CampaignConfig& c,
                   const qrot::CampaignResult& r, const std::map<std::string, std::string>& extra) {
  const std::filesystem::path dir(o.out);
  qrot::write_file(dir, "curve.csv", to_text([&](auto& s) { qrot::write_curve_csv(s, r.curve, r.failures.size()); }));
  qrot::write_file(dir, "usage.csv", to_text([&](auto& s) { qrot::write_usage_csv(s, r.usage, c.controls); }));
  qrot::write_file(dir, "failures.txt",
                   to_text([&](auto& s) { qrot::write_failures(s, r.failures, c.runs * c.angles()); }));
  auto fields = extra;
  fields["ledger_violations"] = std::to_string(r.ledger_violations);
  qrot::write_file(dir, "manifest.json", to_text([&](auto& s) {
                     qrot::write_manifest(s, command, c.seed, qrot::resolved_config(c), fields);
                   }));
  std::cout << command << ": " << r.curve.rows.size() << " windows, " << r.failures.size() << " flagged runs, "
            << r.ledger_violations << " ledger violations -> " << dir.string() << '\n';
}

int cmd_simulate(const Options& o) {
  const auto c = load_campaign(o);
  const auto r = qrot::run_campaign(c);
  emit_campaign(o, "simulate", c, r, {});
  qrot::write_file(o.out, "pool.csv", to_text([&](auto& s) { qrot::ReplayLibrary::write_csv(s, r.records); }));
  return 0;
}

int cmd_replay(const Options& o) {
  const auto c = load_campaign(o);
  std::ifstream in(o.pool);
  if (!in) throw qrot::ValidationError("cannot open replay pool " + o.pool);
  std::stringstream raw;
  raw << in.rdbuf();
  std::istringstream parse(raw.str());
  const auto lib = qrot::ReplayLibrary::read_csv(parse, c.controls);
  const auto r = qrot::run_campaign(c, lib);
  emit_campaign(o, "replay", c, r, {{"pool_hash", qrot::content_hash(raw.str())}});
  return 0;
}

int cmd_bound(const Options& o) {
  qrot::WeightMatrix g = qrot::WeightMatrix::phase_only();
  std::array<double, qrot::kNumControls> vis = qrot::si_table().mean_visibility;
  qrot::ControlSet controls;
  std::int64_t n_max = 5000;
  std::uint64_t seed = 0;
  if (!o.config.empty()) {
    const auto c = load_campaign(o);
    g = c.g;
    controls = c.controls;
    n_max = c.budget;
    seed = c.seed;
    vis.fill(0.0);
    for (const auto& p : c.true_points) {
      for (std::size_t i = 0; i < qrot::kNumControls; ++i) vis[i] += p.visibility(i);
    }
    for (auto& v : vis) v /= static_cast<double>(c.true_points.size());
  }
  if (!o.weights.empty()) g = qrot::WeightMatrix::parse(o.weights);
  if (o.budget) n_max = *o.budget;
  if (n_max < 1) throw qrot::ValidationError("budget: must be at least 1");

  const auto spec = qrot::solve_c_g(g, vis, controls);
  std::vector<double> grid(static_cast<std::size_t>(n_max));
  std::iota(grid.begin(), grid.end(), 1.0);
  const auto rows = qrot::reference_curves(grid, spec);

  nlohmann::ordered_json params;
  params["weights"] = g.diag();
  params["visibilities"] = vis;
  params["controls"] = controls.values();
  params["budget"] = n_max;
  const std::string resolved = params.dump(2);

  std::ostringstream report;
  report << "C_G " << qrot::format_real(spec.c_g) << '\n';
  report << "xi " << qrot::format_real(spec.xi) << '\n';
  report << "xi_C_G " << qrot::format_real(spec.xi * spec.c_g) << '\n';
  for (std::size_t i = 0; i < qrot::kNumControls; ++i) {
    report << "x_s" << controls.s(i) << ' ' << qrot::format_real(spec.allocation.x[i]) << '\n';
  }
  std::cout << report.str();
  if (!o.out.empty()) {
    qrot::write_file(o.out, "bound.csv", to_text([&](auto& s) { qrot::write_bound_csv(s, rows); }));
    qrot::write_file(o.out, "report.txt", report.str());
    qrot::write_file(o.out, "manifest.json",
                     to_text([&](auto& s) { qrot::write_manifest(s, "bound", seed, resolved); }));
  }
  return 0;
}

int cmd_calibrate(const Options& o) {
  std::ifstream in(o.input);
  if (!in) throw qrot::ValidationError("cannot open frequency table " + o.input);
  std::stringstream raw;
  raw << in.rdbuf();
  std::istringstream parse(raw.str());
  std::vector<qrot::CalibrationRow> rows;
  std::size_t clipped = 0;
  for (const auto& f : qrot::read_frequency_table(parse)) {
    rows.push_back({f.angle_id, f.s, qrot::visibility_estimate(f.record)});
    clipped += rows.back().estimate.clipped;
  }
  const std::string text = to_text([&](auto& s) { qrot::write_calibration_csv(s, rows); });
  std::cout << text << "clipped " << clipped << " of " << rows.size() << '\n';
  if (!o.out.empty()) {
    nlohmann::ordered_json params;
    params["input_hash"] = qrot::content_hash(raw.str());
    qrot::write_file(o.out, "calibration.csv", text);
    qrot::write_file(o.out, "manifest.json", to_text([&](auto& s) {
                       qrot::write_manifest(s, "calibrate", 0, params.dump(2), {{"clipped", std::to_string(clipped)}});
                     }));
  }
  return 0;
}

int cmd_xi(const Options& o) {
  const std::uint64_t seed = o.seed.value_or(1);
  const double closed = qrot::xi_closed_form();
  const double mc = qrot::xi_monte_carlo(o.draws, seed);
  char buf[128];
  std::snprintf(buf, sizeof buf, "xi %.4f\nclosed_form %s\nmonte_carlo %s\ndraws %llu\n", closed,
                qrot::format_real(closed).c_str(), qrot::format_real(mc).c_str(),
                static_cast<unsigned long long>(o.draws));
  std::cout << buf;
  if (!o.out.empty()) {
    nlohmann::ordered_json params;
    params["draws"] = o.draws;
    qrot::write_file(o.out, "xi.txt", buf);
    qrot::write_file(o.out, "manifest.json",
                     to_text([&](auto& s) { qrot::write_manifest(s, "xi", seed, params.dump(2)); }));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive multiparameter rotation estimation: simulation, replay and bounds"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "run a campaign against the simulator");
  auto* rep = app.add_subcommand("replay", "run a campaign against recorded outcomes");
  for (auto* sub : {sim, rep}) {
    sub->add_option("--config", o.config, "campaign config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--runs", o.runs, "override runs per angle");
    sub->add_option("--budget", o.budget, "override the resource budget per run");
    sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
  }
  rep->add_option("--pool", o.pool, "replay pool CSV")->required()->check(CLI::ExistingFile);

  auto* bound = app.add_subcommand("bound", "allocation-optimized bound and reference curves");
  bound->add_option("--config", o.config, "campaign config (weights, truths, budget)")->check(CLI::ExistingFile);
  bound->add_option("--weights", o.weights, "weight selector, e.g. theta+v4");
  bound->add_option("--budget", o.budget, "largest N on the grid");
  bound->add_option("--out", o.out, "output directory");

  auto* cal = app.add_subcommand("calibrate", "visibilities from frequency data");
  cal->add_option("--input", o.input, "CSV angle_id,s,f0,f_plus,nu")->required()->check(CLI::ExistingFile);
  cal->add_option("--out", o.out, "output directory");

  auto* xi = app.add_subcommand("xi", "median-to-mean factor");
  xi->add_option("--draws", o.draws, "Monte Carlo draws")->check(CLI::PositiveNumber);
  xi->add_option("--seed", o.seed, "Monte Carlo seed");
  xi->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationExit;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o);
    if (rep->parsed()) return cmd_replay(o);
    if (bound->parsed()) return cmd_bound(o);
    if (cal->parsed()) return cmd_calibrate(o);
    if (xi->parsed()) return cmd_xi(o);
  } catch (const qrot::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
  return kValidationExit;
}
