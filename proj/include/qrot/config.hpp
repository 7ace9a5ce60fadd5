#pragma once

// JSON campaign configuration.
//
//   {
//     "weights": "theta+v4",            // or [1, 0, 0, 0, 1]
//     "seed": 7,
//     "runs": 100, "budget": 5000,
//     "truth": {"table": "si", "angles": [0, 2, 4, 6], "visibilities": "mean"}
//   }
//
// Only "weights" and "seed" are required. "truth" is either
// {"table": "si" | PATH, "angles": "all" | [ids], "visibilities": "row" | "mean"}
// or {"points": [[theta, v1, v2, v3, v4], ...]}; the default is every row of
// the bundled table with its own visibilities. Unknown keys are rejected. A
// run manifest (which embeds the resolved config under "config") is accepted
// as well.

#include <filesystem>
#include <string>

#include "qrot/harness.hpp"

namespace qrot {

// Relative table paths resolve against base_dir. Throws ParseError for bad
// syntax and ValidationError naming the field otherwise.
CampaignConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = ".");
CampaignConfig parse_config(const std::filesystem::path& path);

// Canonical JSON with every field explicit and truths as points; parsing it
// back gives an identical config.
std::string resolved_config(const CampaignConfig& config);

// 64-bit FNV-1a as 16 hex digits.
std::string content_hash(const std::string& text);

}  // namespace qrot
