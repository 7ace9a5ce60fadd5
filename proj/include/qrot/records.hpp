#pragma once

// Line-oriented run records and the replay pool.
//
// Run record:
//   # seed=42
//   # angle_id=0
//   # run_id=3
//   # truth=0.38,0.9399,0.9153,0.7936,0.7222     (simulated runs only)
//   1,B1,1
//   51,B2,-1
//
// Replay pool CSV, header angle_id,s,basis,outcome or
// angle_id,run_id,s,basis,outcome. Without run_id each (angle, s, basis)
// queue is split into `runs` contiguous chunks, chunk r feeding run r.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include "qrot/core_model.hpp"

namespace qrot {

void write_run_record(std::ostream& out, const RunRecord& run);
// Throws ParseError with the 1-based line number on malformed input.
RunRecord read_run_record(std::istream& in, const ControlSet& controls = {});

// Sequential outcome queues keyed by (angle_id, s, basis).
class ReplayPool {
 public:
  void push(std::size_t angle_id, int s, Basis basis, Outcome outcome);
  // Returns and consumes the next outcome; throws PoolExhausted.
  Outcome next_outcome(std::size_t angle_id, const ControlSetting& setting);
  std::size_t remaining(std::size_t angle_id, int s, Basis basis) const;
  std::size_t total_remaining() const;

 private:
  friend class ReplayLibrary;
  using Key = std::tuple<std::size_t, int, Basis>;
  struct Queue {
    std::vector<Outcome> outcomes;
    std::size_t cursor = 0;
  };
  std::map<Key, Queue> queues_;
};

// Replay data for a whole campaign, partitioned per run before any run starts.
class ReplayLibrary {
 public:
  static ReplayLibrary read_csv(std::istream& in, const ControlSet& controls = {});

  // Writes every record of every run with explicit run ids.
  static void write_csv(std::ostream& out, std::span<const RunRecord> runs);

  bool has_run_ids() const { return explicit_; }
  // Fresh pool holding the outcomes assigned to (angle_id, run_id).
  ReplayPool pool_for(std::size_t angle_id, std::size_t run_id, std::size_t runs) const;

 private:
  bool explicit_ = false;
  std::map<std::size_t, ReplayPool> by_run_;  // run id -> pool (run 0 when implicit)
};

}  // namespace qrot
