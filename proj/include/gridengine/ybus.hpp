#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridengine/linear.hpp"
#include "gridengine/model.hpp"

namespace gridengine {

/// Two-port admittance stamp of one branch. Tap t and shift θ sit on the
/// from side:
///   Yff = (y + jb/2)/t²,  Ytt = y + jb/2,
///   Yft = -y/(t·e^{-jθ}), Ytf = -y/(t·e^{+jθ}),  y = 1/(r + jx).
struct BranchStamp {
    Complex yff;
    Complex yft;
    Complex ytf;
    Complex ytt;
};

BranchStamp branch_stamp(const Branch& br);

/// Node admittance matrix over the in-service buses of a network.
struct AdmittanceMatrix {
    ComplexSparse y;
    /// Dense index -> model bus index.
    std::vector<std::size_t> model_index;
    /// Model bus index -> dense index, -1 when the bus is out of service.
    std::vector<int> dense_index;
    std::vector<std::string> bus_ids;

    int dimension() const noexcept { return static_cast<int>(y.rows()); }
    std::optional<int> index_of(std::string_view bus_id) const;
    /// Entry lookup by bus id (zero when structurally absent).
    Complex at(std::string_view row_bus, std::string_view col_bus) const;
};

/// Requires layer >= AcLoadflow. Throws ImpedanceTooSmall for in-service
/// branches below the network's z_min.
AdmittanceMatrix build_ybus(const NetworkModel& net);

/// DC susceptance matrix: off-diagonals -1/x, diagonals the sum of incident
/// 1/x (taps and resistance ignored).
struct SusceptanceMatrix {
    RealSparse b;
    std::vector<std::size_t> model_index;
    /// Model bus index -> reduced index, -1 for removed or out-of-service buses.
    std::vector<int> reduced_index;
    std::vector<std::string> bus_ids;
};

/// Throws ZeroReactance for an in-service branch with x = 0.
SusceptanceMatrix build_bprime(const NetworkModel& net, bool slack_removed);

/// Coordinate text dump: one "row col re im" line per stored entry.
void write_coordinate(std::ostream& os, const AdmittanceMatrix& ybus);

void require_layer(const NetworkModel& net, Layer minimum, std::string_view operation);

}  // namespace gridengine
