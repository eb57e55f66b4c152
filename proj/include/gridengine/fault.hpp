#pragma once

#include <string_view>
#include <vector>

#include "gridengine/linear.hpp"
#include "gridengine/model.hpp"

namespace gridengine {

struct FaultResult {
    Complex current;
    Complex z_thevenin;
    /// Post-fault voltage per model bus; buses outside the faulted island
    /// keep their pre-fault value.
    std::vector<Complex> post_fault_voltages;
};

/// Balanced three-phase fault through z_fault at one bus.
///
/// Pre-fault voltages are the model's v_mag∠v_ang. Slack buses without
/// short-circuit data are ideal sources; buses with short-circuit data add
/// their source admittance 1/(j·x_source). Loads are neglected.
FaultResult bus_fault_current(const NetworkModel& net, std::string_view bus, Complex z_fault);

}  // namespace gridengine
