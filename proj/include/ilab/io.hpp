#pragma once

#include <string>

#include "ilab/flow.hpp"

namespace ilab {

/// Shortest round-trip decimal form, locale-independent.
std::string fmt_double(double v);

void write_text_file(const std::string& path, const std::string& content);

/// CSV with columns (step, t, rho, l1_norm, excess_risk, stopped_flag).
std::string trajectory_to_csv(const BoostingTrajectory& traj);

}  // namespace ilab
