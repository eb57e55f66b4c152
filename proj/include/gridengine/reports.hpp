#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridengine/contingency.hpp"
#include "gridengine/cosim.hpp"
#include "gridengine/dynamics.hpp"
#include "gridengine/loadflow.hpp"
#include "gridengine/model.hpp"

namespace gridengine {

/// Whole file as a string; throws ErrorKind::Io naming the path.
std::string read_file(const std::filesystem::path& path);

/// Writes to "<path>.tmp" and renames over `path`, so readers never see a
/// partial file. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Numbers in CSV reports use 9 significant digits.
std::string format_number(double value);

/// id,v_mag,v_ang_deg,p,q (net injection gen − load, pu), one row per bus.
std::string loadflow_bus_csv(const NetworkModel& net, const LoadflowResult& lf);
/// id,p_from,q_from,p_to,q_to (pu), one row per branch.
std::string loadflow_branch_csv(const LoadflowResult& lf);
/// contingency,islanding,worst_branch,worst_flow,worst_rating,worst_percent,violations,error
std::string contingency_csv(std::span<const CaResult> results);
/// round,direction,bus,va_re,va_im,vb_re,vb_im,vc_re,vc_im,s_re,s_im,ineg_re,ineg_im,izero_re,izero_im
std::string exchange_trace_csv(std::span<const BoundaryExchange> trace);
/// time, then delta:<gen>, omega_dev:<gen> and v_mag:<bus> columns.
std::string trajectory_csv(const Trajectory& traj);
/// JSON list of the trajectory columns with quantity and unit.
std::string trajectory_manifest(const Trajectory& traj);

/// JSON list of events: [{"time": s, "kind": "ApplyBusFault", "target": id,
/// "z_fault": [re, im]}]. z_fault is optional (default 0, a bolted fault).
std::vector<DynEvent> parse_events(std::string_view text);

}  // namespace gridengine
