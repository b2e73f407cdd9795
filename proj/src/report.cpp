#include "trajmbm/report.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace trajmbm {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string window_label(int window) { return window == 0 ? "full" : std::to_string(window); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

nlohmann::json trajectory_to_json(const Trajectory& t) {
  nlohmann::json j;
  j["birth"] = t.birth;
  j["last"] = t.last;
  nlohmann::json states = nlohmann::json::array();
  for (const Vec& x : t.states) {
    states.push_back(std::vector<double>(x.data(), x.data() + x.size()));
  }
  j["states"] = std::move(states);
  return j;
}

}  // namespace

std::string summary_csv(const McReport& report) {
  std::string out = "scenario,N,L,trials,total,loc,missed,false,mean_trial_seconds\n";
  if (report.trials > 0) {
    out += report.config.name + "," + std::to_string(report.config.filter.nscan) + "," +
           window_label(report.config.filter.window) + "," + std::to_string(report.trials) +
           "," + fmt(report.overall_mean.total) + "," + fmt(report.overall_mean.localization) +
           "," + fmt(report.overall_mean.missed) + "," + fmt(report.overall_mean.false_targets) +
           "," + fmt(report.mean_trial_seconds) + "\n";
  }
  return out;
}

void emit_results(const McReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory: " + dir);
  }

  write_file(fs::path(dir) / "summary.csv", summary_csv(report));

  std::string per_scan = "scan,total,loc,missed,false\n";
  for (std::size_t k = 0; k < report.per_scan_mean.size(); ++k) {
    const GospaResult& g = report.per_scan_mean[k];
    per_scan += std::to_string(k + 1) + "," + fmt(g.total) + "," + fmt(g.localization) + "," +
                fmt(g.missed) + "," + fmt(g.false_targets) + "\n";
  }
  write_file(fs::path(dir) / "per_scan.csv", per_scan);

  nlohmann::json trajectories;
  trajectories["trials"] = nlohmann::json::array();
  for (std::size_t t = 0; t < report.trial_results.size(); ++t) {
    const TrialResult& trial = report.trial_results[t];
    nlohmann::json entry;
    entry["trial"] = t;
    entry["filtered"] = nlohmann::json::array();
    for (const Trajectory& traj : trial.filtered) {
      entry["filtered"].push_back(trajectory_to_json(traj));
    }
    entry["smoothed"] = nlohmann::json::array();
    for (const Trajectory& traj : trial.smoothed) {
      entry["smoothed"].push_back(trajectory_to_json(traj));
    }
    trajectories["trials"].push_back(std::move(entry));
  }
  write_file(fs::path(dir) / "trajectories.json", trajectories.dump(1));

  if (report.config.debug_dual) {
    std::string convergence = "trial,scan,iteration,dual,best_primal,gap\n";
    for (std::size_t t = 0; t < report.trial_results.size(); ++t) {
      for (const ConvergenceRecord& rec : report.trial_results[t].convergence) {
        convergence += std::to_string(t) + "," + std::to_string(rec.scan) + "," +
                       std::to_string(rec.iteration) + "," + fmt(rec.dual) + "," +
                       fmt(rec.best_primal) + "," + fmt(rec.gap) + "\n";
      }
    }
    write_file(fs::path(dir) / "convergence.csv", convergence);
  }
}

}  // namespace trajmbm
