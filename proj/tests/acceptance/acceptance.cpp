// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "qrot/bounds.hpp"
#include "qrot/calibration.hpp"
#include "qrot/experiment_design.hpp"
#include "qrot/harness.hpp"
#include "qrot/outputs.hpp"
#include "qrot/particle_filter.hpp"

using namespace qrot;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::size_t g_ledger_violations = 0;
std::size_t g_ledger_samples = 0;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
  std::atomic<std::size_t> next{0};
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k; (k = next.fetch_add(1)) < n;) body(k);
    });
  }
}

std::array<double, 4> vis_of(const ParameterPoint& p) {
  return {p.visibility(0), p.visibility(1), p.visibility(2), p.visibility(3)};
}

Verdict xi_constant_check() {
  const double closed = xi_closed_form();
  const double mc = xi_monte_carlo(10'000'000, 1);
  Verdict v;
  v.pass = std::abs(closed - 0.4549) <= 1e-4 && std::abs(mc - closed) < 1e-3;
  v.detail = fmt("closed %.7f, monte carlo %.7f (1e7 draws)", closed, mc);
  return v;
}

Verdict fisher_oracle() {
  RngStream rng(77);
  std::vector<ParameterPoint> points(si_table().angles);
  for (int k = 0; k < 100; ++k) {
    points.push_back(ParameterPoint::make(kPi * rng.uniform(), {0.01 + 0.98 * rng.uniform(), 0.01 + 0.98 * rng.uniform(),
                                                                0.01 + 0.98 * rng.uniform(), 0.01 + 0.98 * rng.uniform()}));
  }
  double worst = 0.0, raw = 0.0;
  bool ok = true;
  for (const auto& p : points) {
    const std::array<double, 4> nu{1 + 10 * rng.uniform(), 1 + 10 * rng.uniform(), 1 + 10 * rng.uniform(),
                                   1 + 10 * rng.uniform()};
    const auto ours = fisher_matrix(p, nu);
    const auto ref = oracle::exact_fisher(p.theta.value(), vis_of(p), nu);
    for (int a = 0; a < 5; ++a) {
      for (int b = 0; b < 5; ++b) {
        if (ref(a, b) == 0.0) {
          ok = ok && ours(a, b) == 0.0;
          continue;
        }
        const double r = std::abs(ours(a, b) - ref(a, b)) / std::abs(ref(a, b));
        // Cross terms vanish at isolated angles; compare those against the diagonal scale.
        const double floor = 1e-13 * std::sqrt(std::abs(ref(a, a) * ref(b, b))) / std::abs(ref(a, b));
        raw = std::max(raw, r);
        worst = std::max(worst, std::max(0.0, r - floor));
      }
    }
  }
  return {ok && worst < 1e-8, fmt("%zu points, worst relative error %.2e beyond a 1e-13 floor (raw %.2e)", points.size(), worst, raw)};
}

Verdict averaged_quadrature() {
  const AllocationVector x{{0.1, 0.05, 0.02, 0.01}};
  const auto v = si_table().mean_visibility;
  const auto per_angle = [&](int a, int b) {
    return oracle::average([&](double t) { return fisher_matrix(ParameterPoint::make(t, v), x.x)(a, b); }, 0.0, kPi,
                           400);
  };
  double phase_err = std::abs(per_angle(0, 0) - oracle::si_average_phase(x.x, v)) / oracle::si_average_phase(x.x, v);
  double vis_err = 0.0, off = 0.0, ratio = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double q = per_angle(i + 1, i + 1);
    const double si = oracle::si_average_visibility(x.x[i], v[i]);
    vis_err = std::max(vis_err, std::abs(q - si) / si);
    ratio = std::max(ratio, si / q);
    off = std::max(off, std::abs(per_angle(0, i + 1)));
    for (int j = i + 1; j < 4; ++j) off = std::max(off, std::abs(per_angle(i + 1, j + 1)));
  }
  return {phase_err < 1e-6 && vis_err < 1e-6 && off < 1e-8,
          fmt("theta-theta rel err %.2e, visibility rel err %.2e (closed form / quadrature up to %.6f), "
              "off-diagonal %.2e",
              phase_err, vis_err, ratio, off)};
}

Verdict c_g_vertices() {
  const ControlSet controls;
  const auto vis = si_table().mean_visibility;
  const auto spec = solve_c_g(WeightMatrix::phase_only(), vis);
  double best = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double q = controls.s(i) * (1 - std::sqrt(1 - vis[i] * vis[i]));
    if (q > best) best = q, arg = i;
  }
  const double cg_err = std::abs(spec.c_g - 1.0 / (4.0 * best)) / (1.0 / (4.0 * best));
  bool ok = cg_err < 1e-6 && std::abs(spec.allocation.x[arg] - 1.0 / controls.s(arg)) < 1e-6;
  double x_err = 0.0;
  for (std::size_t i0 = 0; i0 < 4; ++i0) {
    std::array<double, 5> d{0, 0, 0, 0, 0};
    d[i0 + 1] = 1;
    x_err = std::max(x_err, std::abs(solve_c_g(WeightMatrix(d), vis).allocation.x[i0] - 1.0 / controls.s(i0)));
  }
  ok = ok && x_err < 1e-6;
  return {ok, fmt("phase-only on s=%d, C_G rel err %.2e; single-visibility allocation err %.2e", controls.s(arg),
                  cg_err, x_err)};
}

Verdict grid_posterior() {
  const ControlSet controls;
  const int grid = 200;
  std::vector<ParameterPoint> p;
  for (int a = 0; a < grid; ++a)
    for (int b = 0; b < grid; ++b)
      p.push_back(ParameterPoint::make((a + 0.5) * kPi / grid, {(b + 0.5) / grid, 0.9, (b + 0.5) / grid, 0.7}));
  auto e = Ensemble::from_particles(p);
  RngStream rng(8);
  std::vector<ExperimentRecord> recs;
  for (int k = 0; k < 50; ++k) {
    const std::size_t idx = k % 3 == 0 ? 2 : 0;
    recs.push_back({ControlSetting::make(controls, idx, rng.uniform() < 0.5 ? Basis::B1 : Basis::B2),
                    rng.uniform() < 0.6 ? Outcome::Plus : Outcome::Minus});
  }
  for (const auto& r : recs) bayes_update(e, r);
  std::vector<double> logw(p.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (const auto& r : recs) {
      logw[k] += std::log(oracle::lik(sign(r.outcome), r.setting.s, static_cast<int>(r.setting.basis),
                                      p[k].theta.value(), p[k].visibility(r.setting.index)));
    }
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  for (auto& l : logw) z += (l = std::exp(l - top));
  double tv = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) tv += std::abs(e.weights()[k] - logw[k] / z);
  tv *= 0.5;
  return {tv < 1e-10, fmt("40000-point grid, 50 records, total variation %.2e", tv)};
}

Verdict greedy_exactness() {
  const ControlSet controls;
  const std::array<std::array<double, 5>, 4> gs{{{1, 0, 0, 0, 0}, {1, 0, 0, 0, 1}, {1, 1, 1, 1, 1}, {0, 0, 1, 0, 0}}};
  std::size_t misses = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngStream rng(derive_seed(6, seed));
    const double centre = kPi * rng.uniform();
    const double spread = std::pow(10.0, -3.0 * rng.uniform());
    std::vector<ParameterPoint> pts;
    std::vector<oracle::Particle> op;
    std::vector<double> w;
    for (int k = 0; k < 300; ++k) {
      const double theta = wrap_angle(centre + spread * rng.normal());
      const std::array<double, 4> v{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
      pts.push_back(ParameterPoint::make(theta, v));
      op.push_back({theta, v});
      w.push_back(0.05 + rng.uniform());
    }
    const auto e = Ensemble::from_particles(pts, w);
    const auto& g = gs[seed % gs.size()];
    const auto chosen = greedy_select(e, WeightMatrix(g));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& st : all_settings(controls)) {
      best = std::min(best, oracle::expected_variance(op, w, static_cast<int>(st.index), static_cast<int>(st.basis), g));
    }
    const double got =
        oracle::expected_variance(op, w, static_cast<int>(chosen.index), static_cast<int>(chosen.basis), g);
    misses += got > best + 1e-12 * best;
  }
  return {misses == 0, fmt("50 ensembles, %zu choices above the recomputed minimum", misses)};
}

CampaignConfig scaled_campaign(std::uint64_t seed) {
  CampaignConfig c;
  c.seed = seed;
  c.runs = 100;
  c.budget = 5000;
  c.g = WeightMatrix::phase_only();
  const auto& t = si_table();
  for (std::size_t a : {0, 2, 4, 6}) c.true_points.push_back(ParameterPoint::make(t.angles[a].theta.value(), t.mean_visibility));
  return c;
}

std::vector<CampaignResult> g_scaled;

Verdict bound_consistency() {
  const std::uint64_t seeds[] = {101, 102, 103, 104, 105};
  const auto spec = solve_c_g(WeightMatrix::phase_only(), si_table().mean_visibility);
  const double xc = spec.xi * spec.c_g;
  int good = 0;
  std::string detail = fmt("xi C_G %.6g;", xc);
  for (std::uint64_t seed : seeds) {
    g_scaled.push_back(run_campaign(scaled_campaign(seed)));
    const auto& r = g_scaled.back();
    g_ledger_violations += r.ledger_violations;
    for (const auto& rec : r.records) g_ledger_samples += rec.records.size();
    std::size_t below_bound = 0;
    double min_ratio = std::numeric_limits<double>::infinity();
    bool sub_sql = false;
    for (const auto& row : r.curve.rows) {
      if (row.n_center > 500) {
        below_bound += row.median < xc / row.n_center;
        min_ratio = std::min(min_ratio, row.median / (xc / row.n_center));
      }
      if (row.n_center >= 2000 && row.n_center <= 5000) sub_sql = sub_sql || row.median < 1.0 / row.n_center;
    }
    const bool ok = below_bound == 0 && sub_sql;
    good += ok;
    detail += fmt(" seed %llu %s (min median/bound %.3f, sub-SQL %s, %zu flagged);",
                  static_cast<unsigned long long>(seed), ok ? "ok" : "no", min_ratio, sub_sql ? "yes" : "no",
                  r.failures.size());
  }
  detail += fmt(" %d/5 seeds", good);
  return {good >= 4, detail};
}

Verdict plateau() {
  CampaignConfig c;
  c.seed = 808;
  c.runs = 25;
  c.budget = 5000;
  c.g = WeightMatrix::parse("theta+v4");
  c.true_points = si_table().angles;
  const std::size_t tasks = c.runs * c.angles();
  std::vector<double> worst(tasks, 0.0);
  std::vector<std::size_t> steps(tasks, 0), used(tasks, 0), violations(tasks, 0), samples(tasks, 0);
  parallel_for(tasks, [&](std::size_t k) {
    const std::size_t a = k / c.runs, r = k % c.runs;
    const auto run = run_estimation(c, a, r, true);
    violations[k] = count_ledger_violations(run);
    samples[k] = run.samples.size();
    for (std::size_t i = 0; i < run.estimates.size(); ++i) {
      if (run.record.records[i].setting.s == 51) {
        used[k] = 1;
        break;
      }
      worst[k] = std::max(worst[k], std::abs(run.estimates[i].visibility(3) - 0.5));
      ++steps[k];
    }
  });
  double w = 0.0;
  std::size_t total_steps = 0, runs_using = 0;
  for (std::size_t k = 0; k < tasks; ++k) {
    w = std::max(w, worst[k]);
    total_steps += steps[k];
    runs_using += used[k];
    g_ledger_violations += violations[k];
    g_ledger_samples += samples[k];
  }
  return {w <= 1e-6, fmt("%zu runs (%zu reach s=51), %zu pre-s=51 steps, max |V4 - 0.5| %.2e", tasks, runs_using,
                         total_steps, w)};
}

Verdict usage_migration() {
  std::string detail;
  bool ok = true;
  for (const auto& r : g_scaled) {
    std::vector<double> n, share;
    bool started = false;
    for (const auto& u : r.usage) {
      if (u.n_center > 5000) continue;
      started = started || u.share[3] > 0.0;
      if (!started) continue;
      n.push_back(u.n_center);
      share.push_back(u.share[3]);
    }
    const double rho = n.size() > 2 ? oracle::spearman(n, share) : 0.0;
    ok = ok && rho > 0.8;
    detail += fmt("rho %.3f (%zu windows); ", rho, n.size());
  }
  return {ok && !g_scaled.empty(), detail};
}

Verdict calibration_cells() {
  const auto& t = si_table();
  const ControlSet controls;
  double worst = 0.0;
  std::size_t misses = 0;
  for (std::size_t a = 0; a < t.angles.size(); ++a) {
    for (std::size_t i = 0; i < kNumControls; ++i) {
      RngStream rng(derive_seed(2022, a, i));
      const auto f = simulate_frequencies(rng, t.angles[a], i, 100000, controls);
      const double err = std::abs(visibility_estimate(f).value.value() - t.angles[a].visibility(i));
      worst = std::max(worst, err);
      misses += !(err < 0.005);
    }
  }
  return {misses == 0, fmt("32 cells at 1e5 shots, %zu outside 0.005, worst %.4f", misses, worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs `args` into dir/<tag>, returns exit status; stdout goes to dir/<tag>/stdout.
int run_cli(const fs::path& dir, const std::string& args) {
  fs::create_directories(dir);
  const std::string cmd = std::string("\"") + QROT_CLI + "\" " + args + " > \"" + (dir / "stdout").string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a)) files.push_back(e.path().filename());
  std::size_t other = 0;
  for (const auto& e : fs::directory_iterator(b)) other += e.is_regular_file();
  if (files.size() != other) {
    why = "file sets differ";
    return false;
  }
  for (const auto& f : files) {
    if (!fs::exists(b / f) || slurp(a / f) != slurp(b / f)) {
      why = f.string() + " differs";
      return false;
    }
  }
  return true;
}

Verdict determinism() {
  const fs::path root = fs::path(QROT_WORK_DIR) / "acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "campaign.json");
    cfg << R"({"weights": "theta+v4", "seed": 17, "runs": 4, "budget": 800, "particles": 1000,
  "bootstrap_resamples": 500, "truth": {"table": "si", "angles": [1, 5]}})";
    std::ofstream freq(root / "freq.csv");
    freq << "angle_id,s,f0,f_plus,nu\n";
    const ControlSet controls;
    for (std::size_t a = 0; a < 8; ++a) {
      for (std::size_t i = 0; i < 4; ++i) {
        RngStream rng(derive_seed(11, a, i));
        const auto f = simulate_frequencies(rng, si_table().angles[a], i, 10000, controls);
        freq << a << ',' << controls.s(i) << ',' << format_real(f.f0) << ',' << format_real(f.f_plus) << ',' << f.nu
             << '\n';
      }
    }
  }
  const std::string cfg = (root / "campaign.json").string();
  struct Cmd {
    std::string name;
    std::function<std::string(const fs::path&)> args;
  };
  const std::vector<Cmd> cmds{
      {"simulate", [&](const fs::path& d) { return "simulate --config " + cfg + " --out " + d.string(); }},
      {"simulate-threads",
       [&](const fs::path& d) { return "simulate --config " + cfg + " --threads 3 --out " + d.string(); }},
      {"replay",
       [&](const fs::path& d) {
         return "replay --config " + cfg + " --pool " + (root / "simulate_a" / "pool.csv").string() + " --out " +
                d.string();
       }},
      {"bound", [&](const fs::path& d) { return "bound --config " + cfg + " --out " + d.string(); }},
      {"calibrate",
       [&](const fs::path& d) { return "calibrate --input " + (root / "freq.csv").string() + " --out " + d.string(); }},
      {"xi", [&](const fs::path& d) { return "xi --out " + d.string(); }},
  };
  std::string detail;
  bool ok = true;
  for (const auto& c : cmds) {
    const auto a = root / (c.name + "_a");
    const auto b = root / (c.name + "_b");
    const int sa = run_cli(a, c.args(a));
    const int sb = run_cli(b, c.args(b));
    std::string why;
    // Outputs embed their own directory only in stdout; compare that separately.
    bool same = sa == 0 && sb == 0;
    if (same) {
      auto strip = [](std::string s, const std::string& dir) {
        for (std::size_t p; (p = s.find(dir)) != std::string::npos;) s.erase(p, dir.size());
        return s;
      };
      same = strip(slurp(a / "stdout"), a.string()) == strip(slurp(b / "stdout"), b.string());
      if (!same) why = "stdout differs";
      fs::remove(a / "stdout");
      fs::remove(b / "stdout");
      same = same && same_tree(a, b, why);
    } else {
      why = fmt("exit %d/%d", sa, sb);
    }
    ok = ok && same;
    detail += c.name + (same ? " identical; " : " DIFFERS (" + why + "); ");
  }
  // Thread count must not change campaign output either.
  std::string why;
  const bool threads_same = same_tree(root / "simulate_a", root / "simulate-threads_a", why);
  ok = ok && threads_same;
  detail += threads_same ? "threads 0 vs 3 identical" : "threads 0 vs 3 DIFFER (" + why + ")";
  return {ok, detail};
}

Verdict ledger() {
  return {g_ledger_violations == 0 && g_ledger_samples > 0,
          fmt("%zu violations over %zu emitted samples", g_ledger_violations, g_ledger_samples)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no time limit
    Verdict (*check)();
  };
  const Criterion criteria[] = {
      {1, "xi constant", 10, xi_constant_check},
      {2, "Fisher-matrix oracle", 1, fisher_oracle},
      {3, "averaged-FI quadrature", 10, averaged_quadrature},
      {4, "C_G vertex check", 1, c_g_vertices},
      {5, "grid-posterior equivalence", 5, grid_posterior},
      {6, "greedy exactness", 5, greedy_exactness},
      {7, "bound consistency", 0, bound_consistency},
      {8, "plateau reproduction", 0, plateau},
      {9, "usage migration", 0, usage_migration},
      {10, "calibration consistency", 30, calibration_cells},
      {11, "determinism", 0, determinism},
      {12, "resource-ledger exactness", 0, ledger},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s) {
      v.pass = false;
      v.detail += fmt("; over the %.0f s limit", c.limit_s);
    }
    failed += !v.pass;
    std::printf("criterion %2d %-28s %s  %s [%.1f s]\n", c.id, c.name, v.pass ? "PASS" : "FAIL", v.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
