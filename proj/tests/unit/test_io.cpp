#include <sstream>

#include "doctest.h"
#include "qrot/calibration.hpp"
#include "qrot/config.hpp"
#include "qrot/errors.hpp"
#include "qrot/harness.hpp"
#include "qrot/records.hpp"

using namespace qrot;

TEST_CASE("config defaults") {
  const auto c = parse_config_text(R"({"weights": "theta+v4", "seed": 7})");
  CHECK(c.seed == 7);
  CHECK(c.runs == 200);
  CHECK(c.budget == 5000);
  CHECK(c.cluster_width == 50);
  CHECK(c.cluster_min_n == 100);
  CHECK(c.bootstrap_resamples == 10000);
  CHECK(c.confidence == 0.99);
  CHECK(c.angles() == 8);
  CHECK(c.g[0] == 1.0);
  CHECK(c.g[4] == 1.0);
  CHECK(c.g[1] == 0.0);
  CHECK(c.true_points[2] == si_table().angles[2]);
}

TEST_CASE("config truth selection") {
  const auto c = parse_config_text(
      R"({"weights": [1,0,0,0,0], "seed": 1, "truth": {"table": "si", "angles": [1, 5], "visibilities": "mean"}})");
  REQUIRE(c.angles() == 2);
  CHECK(c.true_points[1].theta.value() == si_table().angles[5].theta.value());
  CHECK(c.true_points[1].visibility(2) == si_table().mean_visibility[2]);
  const auto p = parse_config_text(R"({"weights": "theta", "seed": 1, "truth": {"points": [[0.3, 0.9, 0.9, 0.8, 0.7]]}})");
  CHECK(p.true_points.at(0).visibility(3) == 0.7);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config_text(R"({"weights": "theta", "seed": 1, "cluster_width": 0})"), ValidationError);
  CHECK_THROWS_AS(parse_config_text(R"({"weights": "theta", "seed": 1, "colour": 3})"), ValidationError);
  CHECK_THROWS_AS(parse_config_text(R"({"seed": 1})"), ValidationError);
  CHECK_THROWS_AS(parse_config_text(R"({"weights": "theta", "seed": 1, "truth": {"angles": [9]}})"), ValidationError);
  try {
    parse_config_text("{\n  \"weights\": \"theta\",\n  \"seed\": 1,,\n}");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("resolved config round trips") {
  auto c = parse_config_text(R"({"weights": "theta+v2", "seed": 11, "runs": 7, "truth": {"angles": [0, 3]}})");
  const auto text = resolved_config(c);
  const auto back = parse_config_text(text);
  CHECK(resolved_config(back) == text);
  CHECK(back.true_points == c.true_points);
  CHECK(content_hash(text) == content_hash(text));
  CHECK(content_hash(text).size() == 16);
  CHECK(content_hash("a") != content_hash("b"));
}

TEST_CASE("run record round trip") {
  RunRecord r;
  r.seed = 42;
  r.angle_id = 1;
  r.run_id = 3;
  r.truth = ParameterPoint::make(0.38, {0.9399, 0.9153, 0.7936, 0.7222});
  const ControlSet controls;
  r.records = {{ControlSetting::make(controls, 0, Basis::B1), Outcome::Plus},
               {ControlSetting::make(controls, 3, Basis::B2), Outcome::Minus},
               {ControlSetting::make(controls, 2, Basis::B1), Outcome::Minus}};
  std::ostringstream out;
  write_run_record(out, r);
  CHECK(out.str().find("51,B2,-1\n") != std::string::npos);
  std::istringstream in(out.str());
  const auto back = read_run_record(in);
  CHECK(back == r);
  CHECK(resource_cost(back) == 63);
}

TEST_CASE("run record grammar") {
  std::istringstream three("1,B1,1\n2,B2,-1\n11,B1,1\n");
  const auto r = read_run_record(three);
  CHECK(r.records.size() == 3);
  CHECK(resource_cost(r) == 14);
  CHECK(r.records[1].setting.basis == Basis::B2);
  CHECK(r.records[1].outcome == Outcome::Minus);

  for (const char* bad : {"1,B1,1\n3,B1,1\n", "1,B1,1\n1,B3,1\n", "1,B1,1\n1,B1,0\n", "1,B1,1\n1,B1\n"}) {
    std::istringstream in(bad);
    try {
      read_run_record(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  std::istringstream unknown("# colour=blue\n1,B1,1\n");
  CHECK_THROWS_AS(read_run_record(unknown), ParseError);
}

TEST_CASE("pool keys are isolated") {
  ReplayPool pool;
  pool.push(0, 51, Basis::B2, Outcome::Minus);
  pool.push(0, 51, Basis::B2, Outcome::Plus);
  pool.push(0, 1, Basis::B1, Outcome::Plus);
  pool.push(1, 51, Basis::B2, Outcome::Plus);
  const ControlSet controls;
  const auto s51b2 = ControlSetting::make(controls, 3, Basis::B2);
  CHECK(pool.next_outcome(0, s51b2) == Outcome::Minus);
  CHECK(pool.remaining(0, 1, Basis::B1) == 1);
  CHECK(pool.remaining(1, 51, Basis::B2) == 1);
  CHECK(pool.next_outcome(0, s51b2) == Outcome::Plus);
  CHECK_THROWS_AS(pool.next_outcome(0, s51b2), PoolExhausted);
  CHECK_THROWS_AS(pool.next_outcome(0, ControlSetting::make(controls, 1, Basis::B1)), PoolExhausted);
  CHECK(pool.total_remaining() == 2);
}

TEST_CASE("library partitions implicit pools into contiguous chunks") {
  std::istringstream in("angle_id,s,basis,outcome\n0,1,B1,1\n0,1,B1,-1\n0,1,B1,-1\n0,1,B1,1\n0,2,B2,1\n0,2,B2,-1\n");
  const auto lib = ReplayLibrary::read_csv(in);
  CHECK_FALSE(lib.has_run_ids());
  const ControlSet controls;
  auto p0 = lib.pool_for(0, 0, 2);
  auto p1 = lib.pool_for(0, 1, 2);
  CHECK(p0.next_outcome(0, ControlSetting::make(controls, 0, Basis::B1)) == Outcome::Plus);
  CHECK(p0.next_outcome(0, ControlSetting::make(controls, 0, Basis::B1)) == Outcome::Minus);
  CHECK(p0.remaining(0, 1, Basis::B1) == 0);
  CHECK(p1.next_outcome(0, ControlSetting::make(controls, 0, Basis::B1)) == Outcome::Minus);
  CHECK(p1.next_outcome(0, ControlSetting::make(controls, 1, Basis::B2)) == Outcome::Minus);
}

TEST_CASE("simulate then replay reproduces the campaign") {
  CampaignConfig c;
  c.seed = 5;
  c.runs = 3;
  c.particles = 800;
  c.budget = 400;
  c.bootstrap_resamples = 200;
  c.threads = 2;
  c.true_points = {si_table().angles[0], si_table().angles[4]};
  const auto sim = run_campaign(c);
  std::stringstream pool;
  ReplayLibrary::write_csv(pool, sim.records);
  const auto lib = ReplayLibrary::read_csv(pool);
  CHECK(lib.has_run_ids());
  const auto rep = run_campaign(c, lib);
  CHECK(rep.records == sim.records);
  REQUIRE(rep.curve.rows.size() == sim.curve.rows.size());
  for (std::size_t k = 0; k < rep.curve.rows.size(); ++k) {
    CHECK(rep.curve.rows[k].median == sim.curve.rows[k].median);
    CHECK(rep.curve.rows[k].ci_high == sim.curve.rows[k].ci_high);
  }
}
