#pragma once

#include "trajmbm/simulation.hpp"

#include <string>

namespace trajmbm {

/// Writes summary.csv, per_scan.csv and trajectories.json into `dir`
/// (convergence.csv too when the report was run with debug_dual). Throws
/// std::runtime_error when the directory cannot be written.
void emit_results(const McReport& report, const std::string& dir);

/// One summary row: scenario,N,L,trials,total,loc,missed,false,mean_trial_seconds.
std::string summary_csv(const McReport& report);

}  // namespace trajmbm
