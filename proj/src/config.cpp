#include "qrot/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qrot/calibration.hpp"
#include "qrot/errors.hpp"

namespace qrot {
namespace {

using nlohmann::json;

const std::set<std::string> kKeys = {
    "weights",    "seed",         "particles",  "runs",          "budget",   "photon_cap", "cluster_width",
    "cluster_min_n", "bootstrap_resamples", "confidence", "truth", "controls", "resample_threshold",
    "shrinkage",  "threads"};

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  throw ValidationError(field + ": " + msg);
}

template <class T>
T get_number(const json& j, const std::string& field) {
  try {
    if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) field_error(field, "expected a number");
    } else {
      if (!j.is_number_integer()) field_error(field, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0) {
          field_error(field, "must be non-negative");
        }
      }
    }
    return j.get<T>();
  } catch (const json::exception& e) {
    field_error(field, e.what());
  }
}

WeightMatrix parse_weights(const json& j) {
  if (j.is_string()) return WeightMatrix::parse(j.get<std::string>());
  if (!j.is_array() || j.size() != kNumParams) field_error("weights", "expected a selector or 5 numbers");
  std::array<double, kNumParams> d{};
  for (std::size_t i = 0; i < kNumParams; ++i) d[i] = get_number<double>(j[i], "weights");
  WeightMatrix g(d);
  if (g.is_zero()) field_error("weights", "at least one parameter must be weighted");
  return g;
}

std::vector<ParameterPoint> parse_truth(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) field_error("truth", "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "points" && key != "table" && key != "angles" && key != "visibilities") {
      field_error("truth", "unknown key '" + key + "'");
    }
  }
  std::vector<ParameterPoint> points;
  if (j.contains("points")) {
    if (j.size() != 1) field_error("truth", "'points' excludes the table keys");
    const auto& p = j["points"];
    if (!p.is_array() || p.empty()) field_error("truth.points", "expected a non-empty array");
    for (const auto& row : p) {
      if (!row.is_array() || row.size() != kNumParams) field_error("truth.points", "each point needs 5 numbers");
      std::array<double, kNumControls> v{};
      for (std::size_t i = 0; i < kNumControls; ++i) v[i] = get_number<double>(row[i + 1], "truth.points");
      try {
        points.push_back(ParameterPoint::make(get_number<double>(row[0], "truth.points"), v));
      } catch (const ValidationError& e) {
        field_error("truth.points", e.what());
      }
    }
    return points;
  }
  ReferenceTable table;
  const std::string source = j.value("table", std::string("si"));
  if (source == "si") {
    table = si_table();
  } else {
    const std::filesystem::path path = base_dir / source;
    table = load_reference_table(path);
  }
  std::vector<std::size_t> ids;
  if (!j.contains("angles") || (j["angles"].is_string() && j["angles"] == "all")) {
    for (std::size_t i = 0; i < table.angles.size(); ++i) ids.push_back(i);
  } else {
    if (!j["angles"].is_array() || j["angles"].empty()) field_error("truth.angles", "expected \"all\" or ids");
    for (const auto& id : j["angles"]) {
      const auto k = get_number<std::size_t>(id, "truth.angles");
      if (k >= table.angles.size()) field_error("truth.angles", "id " + std::to_string(k) + " not in table");
      ids.push_back(k);
    }
  }
  const std::string vis = j.value("visibilities", std::string("row"));
  if (vis != "row" && vis != "mean") field_error("truth.visibilities", "expected \"row\" or \"mean\"");
  for (auto k : ids) {
    ParameterPoint p = table.angles[k];
    if (vis == "mean") p = ParameterPoint::make(p.theta.value(), table.mean_visibility);
    points.push_back(p);
  }
  return points;
}

CampaignConfig from_json(const json& root, const std::filesystem::path& base_dir) {
  if (!root.is_object()) throw ValidationError("config must be a JSON object");
  if (root.contains("config") && root.contains("config_hash")) return from_json(root["config"], base_dir);
  for (const auto& [key, value] : root.items()) {
    if (!kKeys.count(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  if (!root.contains("weights")) field_error("weights", "required");
  if (!root.contains("seed")) field_error("seed", "required");

  CampaignConfig c;
  c.g = parse_weights(root["weights"]);
  c.seed = get_number<std::uint64_t>(root["seed"], "seed");
  if (root.contains("particles")) c.particles = get_number<std::size_t>(root["particles"], "particles");
  if (root.contains("runs")) c.runs = get_number<std::size_t>(root["runs"], "runs");
  if (root.contains("budget")) c.budget = get_number<std::int64_t>(root["budget"], "budget");
  if (root.contains("photon_cap")) c.photon_cap = get_number<std::int64_t>(root["photon_cap"], "photon_cap");
  if (root.contains("cluster_width")) c.cluster_width = get_number<std::int64_t>(root["cluster_width"], "cluster_width");
  if (root.contains("cluster_min_n")) c.cluster_min_n = get_number<std::int64_t>(root["cluster_min_n"], "cluster_min_n");
  if (root.contains("bootstrap_resamples")) {
    c.bootstrap_resamples = get_number<std::size_t>(root["bootstrap_resamples"], "bootstrap_resamples");
  }
  if (root.contains("confidence")) c.confidence = get_number<double>(root["confidence"], "confidence");
  if (root.contains("resample_threshold")) {
    c.resample_threshold = get_number<double>(root["resample_threshold"], "resample_threshold");
  }
  if (root.contains("shrinkage")) c.shrinkage = get_number<double>(root["shrinkage"], "shrinkage");
  if (root.contains("threads")) c.threads = get_number<unsigned>(root["threads"], "threads");
  if (root.contains("controls")) {
    const auto& s = root["controls"];
    if (!s.is_array() || s.size() != kNumControls) field_error("controls", "expected 4 integers");
    std::array<int, kNumControls> v{};
    for (std::size_t i = 0; i < kNumControls; ++i) v[i] = get_number<int>(s[i], "controls");
    try {
      c.controls = ControlSet(v);
    } catch (const ValidationError& e) {
      field_error("controls", e.what());
    }
  }
  c.true_points = parse_truth(root.contains("truth") ? root["truth"] : json::object(), base_dir);
  c.validate();
  return c;
}

}  // namespace

CampaignConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset to line number.
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) line += text[i] == '\n';
    throw ParseError(std::string("malformed config: ") + e.what(), line);
  }
  return from_json(root, base_dir);
}

CampaignConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::string resolved_config(const CampaignConfig& c) {
  json j = json::object();
  j["weights"] = c.g.diag();
  j["seed"] = c.seed;
  j["particles"] = c.particles;
  j["runs"] = c.runs;
  j["budget"] = c.budget;
  j["photon_cap"] = c.photon_cap;
  j["cluster_width"] = c.cluster_width;
  j["cluster_min_n"] = c.cluster_min_n;
  j["bootstrap_resamples"] = c.bootstrap_resamples;
  j["confidence"] = c.confidence;
  j["controls"] = c.controls.values();
  j["resample_threshold"] = c.resample_threshold;
  j["shrinkage"] = c.shrinkage;
  json points = json::array();
  for (const auto& p : c.true_points) points.push_back(p.as_array());
  j["truth"] = {{"points", points}};
  return j.dump(2);
}

std::string content_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qrot
