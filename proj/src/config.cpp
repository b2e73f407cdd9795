#include "trajmbm/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace trajmbm {

using nlohmann::json;

void validate(const RunConfig& cfg) {
  const ScenarioConfig& s = cfg.scenario;
  if (s.steps < 1) throw std::invalid_argument("scenario.steps must be >= 1");
  if (s.births.size() != s.deaths.size()) {
    throw std::invalid_argument("scenario.births and scenario.deaths differ in length");
  }
  for (std::size_t i = 0; i < s.births.size(); ++i) {
    if (s.births[i] >= s.deaths[i]) {
      throw std::invalid_argument("scenario.births must precede scenario.deaths");
    }
  }
  if (s.pd < 0.0 || s.pd > 1.0) throw std::invalid_argument("scenario.pd must be in [0,1]");
  if (s.ps < 0.0 || s.ps > 1.0) throw std::invalid_argument("scenario.ps must be in [0,1]");
  if (s.clutter_rate < 0.0) throw std::invalid_argument("scenario.clutter_rate must be >= 0");
  if (s.region_max_x <= s.region_min_x || s.region_max_y <= s.region_min_y) {
    throw std::invalid_argument("scenario.region must have positive area");
  }
  const FilterConfig& f = cfg.filter;
  if (f.nscan < 1) throw std::invalid_argument("filter.N must be >= 1");
  if (f.window != 0 && f.window != 1) {
    throw std::invalid_argument("filter.L must be 1 or \"full\"");
  }
  if (f.r_threshold < 0.0) throw std::invalid_argument("filter.r_threshold must be >= 0");
  if (f.max_consecutive_misses < 0) {
    throw std::invalid_argument("filter.max_consecutive_misses must be >= 0");
  }
  if (f.eps_gap <= 0.0) throw std::invalid_argument("filter.eps_gap must be > 0");
  if (f.max_iter < 1) throw std::invalid_argument("filter.max_iter must be >= 1");
  if (f.ppp_prune < 0.0) throw std::invalid_argument("filter.ppp_prune must be >= 0");
  if (f.gate_quantile <= 0.0 || f.gate_quantile >= 1.0) {
    throw std::invalid_argument("filter.gate_quantile must be in (0,1)");
  }
  if (f.birth_weight <= 0.0) throw std::invalid_argument("filter.birth_weight must be > 0");
  if (cfg.trials < 1) throw std::invalid_argument("trials must be >= 1");
}

namespace {

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const json& j) {
  const auto rows = j.size();
  const auto cols = rows > 0 ? j.at(0).size() : 0;
  Mat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<int>(r), static_cast<int>(c)) = j.at(r).at(c).get<double>();
    }
  }
  return m;
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  json s;
  s["steps"] = cfg.scenario.steps;
  s["births"] = cfg.scenario.births;
  s["deaths"] = cfg.scenario.deaths;
  s["midpoint_mean"] = std::vector<double>(
      cfg.scenario.midpoint_mean.data(),
      cfg.scenario.midpoint_mean.data() + cfg.scenario.midpoint_mean.size());
  s["midpoint_cov"] = matrix_to_json(cfg.scenario.midpoint_cov);
  s["region"] = {cfg.scenario.region_min_x, cfg.scenario.region_max_x,
                 cfg.scenario.region_min_y, cfg.scenario.region_max_y};
  s["pd"] = cfg.scenario.pd;
  s["ps"] = cfg.scenario.ps;
  s["clutter_rate"] = cfg.scenario.clutter_rate;
  j["scenario"] = std::move(s);

  json f;
  f["N"] = cfg.filter.nscan;
  if (cfg.filter.window == 0) {
    f["L"] = "full";
  } else {
    f["L"] = cfg.filter.window;
  }
  f["r_threshold"] = cfg.filter.r_threshold;
  f["max_consecutive_misses"] = cfg.filter.max_consecutive_misses;
  f["eps_gap"] = cfg.filter.eps_gap;
  f["max_iter"] = cfg.filter.max_iter;
  f["ppp_prune"] = cfg.filter.ppp_prune;
  f["gate_quantile"] = cfg.filter.gate_quantile;
  f["birth_weight"] = cfg.filter.birth_weight;
  j["filter"] = std::move(f);

  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["debug_dual"] = cfg.debug_dual;
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    cfg.name = j.value("name", cfg.name);
    if (j.contains("scenario")) {
      const json& s = j.at("scenario");
      cfg.scenario.steps = s.value("steps", cfg.scenario.steps);
      if (s.contains("births")) cfg.scenario.births = s.at("births").get<std::vector<int>>();
      if (s.contains("deaths")) cfg.scenario.deaths = s.at("deaths").get<std::vector<int>>();
      if (s.contains("midpoint_mean")) {
        const auto v = s.at("midpoint_mean").get<std::vector<double>>();
        cfg.scenario.midpoint_mean = Eigen::Map<const Vec>(v.data(), v.size());
      }
      if (s.contains("midpoint_cov")) {
        cfg.scenario.midpoint_cov = matrix_from_json(s.at("midpoint_cov"));
      }
      if (s.contains("region")) {
        const auto r = s.at("region").get<std::vector<double>>();
        if (r.size() != 4) throw std::invalid_argument("scenario.region needs 4 values");
        cfg.scenario.region_min_x = r[0];
        cfg.scenario.region_max_x = r[1];
        cfg.scenario.region_min_y = r[2];
        cfg.scenario.region_max_y = r[3];
      }
      cfg.scenario.pd = s.value("pd", cfg.scenario.pd);
      cfg.scenario.ps = s.value("ps", cfg.scenario.ps);
      cfg.scenario.clutter_rate = s.value("clutter_rate", cfg.scenario.clutter_rate);
    }
    if (j.contains("filter")) {
      const json& f = j.at("filter");
      cfg.filter.nscan = f.value("N", cfg.filter.nscan);
      if (f.contains("L")) {
        if (f.at("L").is_string()) {
          if (f.at("L").get<std::string>() != "full") {
            throw std::invalid_argument("filter.L must be 1 or \"full\"");
          }
          cfg.filter.window = 0;
        } else {
          cfg.filter.window = f.at("L").get<int>();
        }
      }
      cfg.filter.r_threshold = f.value("r_threshold", cfg.filter.r_threshold);
      cfg.filter.max_consecutive_misses =
          f.value("max_consecutive_misses", cfg.filter.max_consecutive_misses);
      cfg.filter.eps_gap = f.value("eps_gap", cfg.filter.eps_gap);
      cfg.filter.max_iter = f.value("max_iter", cfg.filter.max_iter);
      cfg.filter.ppp_prune = f.value("ppp_prune", cfg.filter.ppp_prune);
      cfg.filter.gate_quantile = f.value("gate_quantile", cfg.filter.gate_quantile);
      cfg.filter.birth_weight = f.value("birth_weight", cfg.filter.birth_weight);
    }
    cfg.trials = j.value("trials", cfg.trials);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.debug_dual = j.value("debug_dual", cfg.debug_dual);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config file not readable: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return run_config_from_json(buffer.str());
}

std::vector<std::string> preset_names() {
  return {"table1-pd09-lc10", "table1-pd09-lc30", "table1-pd07-lc10", "table1-pd07-lc30"};
}

RunConfig preset_config(const std::string& name) {
  RunConfig cfg;
  cfg.name = name;
  cfg.trials = 100;
  cfg.seed = 1;
  if (name == "table1-pd09-lc10") {
    cfg.scenario.pd = 0.9;
    cfg.scenario.clutter_rate = 10.0;
  } else if (name == "table1-pd09-lc30") {
    cfg.scenario.pd = 0.9;
    cfg.scenario.clutter_rate = 30.0;
  } else if (name == "table1-pd07-lc10") {
    cfg.scenario.pd = 0.7;
    cfg.scenario.clutter_rate = 10.0;
  } else if (name == "table1-pd07-lc30") {
    cfg.scenario.pd = 0.7;
    cfg.scenario.clutter_rate = 30.0;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return cfg;
}

}  // namespace trajmbm
