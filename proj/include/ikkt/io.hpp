#pragma once

#include "ikkt/model.hpp"
#include "ikkt/segmenter.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ikkt {

inline constexpr int kFormatVersion = 1;

using Json = nlohmann::json;

// All *_from_json functions throw ConfigError on schema violations.
Json box_to_json(const BoxConstraint& b);
BoxConstraint box_from_json(const Json& j);
Json boxes_to_json(const std::vector<BoxConstraint>& boxes);
std::vector<BoxConstraint> boxes_from_json(const Json& j);
Json weights_to_json(const CostWeights& w);
CostWeights weights_from_json(const Json& j);
Json dynamics_to_json(const LinearDynamics& d);
LinearDynamics dynamics_from_json(const Json& j);
Json scenario_to_json(const Scenario& s);
// Also runs validate_scenario.
Scenario scenario_from_json(const Json& j);

// Header "k,x1..xn,u1..um"; the last row leaves the controls blank. A leading
// "# format_version: N" line is written and accepted.
std::string trajectory_to_csv(const Trajectory& t);
// nx / nu of -1 are taken from the header.
Trajectory trajectory_from_csv(const std::string& text, int nx = -1, int nu = -1);

// demo,j,first,last,trace_omega,residual,outlier
std::string segmentation_csv(const Segmentation& seg);

std::string read_text(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& text);
Json read_json(const std::filesystem::path& p);
void write_json(const std::filesystem::path& p, const Json& j);

// demo_000.csv, demo_001.csv, ... in a directory.
std::filesystem::path demo_path(const std::filesystem::path& dir, int index);
void write_demos(const std::filesystem::path& dir, const std::vector<Trajectory>& trajs);
// Every *.csv in the directory, in name order.
std::vector<Trajectory> read_demos(const std::filesystem::path& dir, int nx = -1, int nu = -1);

}  // namespace ikkt
