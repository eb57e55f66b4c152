#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gridengine/dynamics.hpp"
#include "gridengine/linear.hpp"
#include "gridengine/loadflow.hpp"
#include "gridengine/model.hpp"

namespace gridengine {

enum class Direction { Downstream, Upstream };

const char* to_string(Direction direction) noexcept;

/// One boundary message of the T&D power-flow iteration. Downstream carries
/// v_abc only; Upstream carries equivalent_load (system base) and the
/// sequence current injections, which are exactly zero for balanced feeders.
struct BoundaryExchange {
    Direction direction = Direction::Downstream;
    std::string boundary_bus;  // transmission-side bus id
    std::array<Complex, 3> v_abc{};
    Complex equivalent_load;
    Complex i_neg;
    Complex i_zero;
    int round = 0;
    bool operator==(const BoundaryExchange&) const = default;
};

/// Positive-sequence voltage replicated on phases a, b, c at 0°, −120°, +120°.
std::array<Complex, 3> balanced_phases(Complex v_positive);

struct CoSimConfig {
    int max_outer_iterations = 20;
    double boundary_tolerance = 1e-6;  // pu voltage change
    LoadflowConfig loadflow;
    void validate() const;
};

/// A distribution network as seen by the transmission side: it answers a
/// Downstream message with an Upstream one.
class FeederEndpoint {
public:
    virtual ~FeederEndpoint() = default;
    virtual BoundaryExchange exchange(const BoundaryExchange& downstream) = 0;
    /// Called once after the outer loop stopped (converged or not).
    virtual void finish(bool converged, int rounds) { (void)converged, (void)rounds; }
};

/// Feeder solved in this process: head bus becomes the slack at the
/// Downstream voltage (phase a), Newton-Raphson solves the feeder, and the
/// complex power drawn at the head is returned converted to the system base.
class LocalFeeder final : public FeederEndpoint {
public:
    LocalFeeder(NetworkModel feeder, std::string head_bus, double system_base_mva, LoadflowConfig cfg = {});

    BoundaryExchange exchange(const BoundaryExchange& downstream) override;

    /// Feeder model holding the latest solution (original head-bus data).
    const NetworkModel& solved() const noexcept { return solved_; }
    const LoadflowResult& last_result() const noexcept { return last_; }
    const std::string& head_bus() const noexcept { return head_; }
    const NetworkModel& model() const noexcept { return original_; }

private:
    NetworkModel original_;
    NetworkModel solved_;
    std::string head_;
    double system_base_;
    LoadflowConfig cfg_;
    LoadflowResult last_;
};

struct FeederLink {
    std::string parent_bus;
    FeederEndpoint* endpoint = nullptr;
};

struct TndPowerflowResult {
    bool converged = false;
    int outer_iterations = 0;
    double max_boundary_change = 0.0;
    LoadflowResult transmission;
    /// In link order; filled by tnd_powerflow (in-process feeders only).
    std::vector<LoadflowResult> feeders;
    /// Every exchanged message in order.
    std::vector<BoundaryExchange> trace;
};

/// Gauss-Seidel outer loop: solve transmission with the current feeder
/// equivalents added to the boundary-bus loads, send every feeder its
/// boundary voltage, collect the equivalents, and stop once the largest
/// boundary-voltage change between consecutive rounds is at most
/// boundary_tolerance (checked from the second round). On return the
/// transmission model holds the last solution with its original loads.
/// Throws NotConverged naming the network whose loadflow failed.
TndPowerflowResult run_tnd_powerflow(NetworkModel& transmission, std::span<const FeederLink> links,
                                     const CoSimConfig& cfg);

/// In-process co-simulation over the child networks of `transmission`
/// (each child's boundary bus is its feeder head). Solved feeder voltages
/// are written back into the children.
TndPowerflowResult tnd_powerflow(NetworkModel& transmission, const CoSimConfig& cfg = {});

/// Split dynamic simulation: the transmission network and each child are
/// separate subsystems coupled at every network solution by MATE (zero link
/// impedance, Thévenin impedances converted to the system base). Needs the
/// model as left by tnd_powerflow. Generators are those of the transmission
/// plus those of the children (`generators_from_model`); children are
/// reported with "<child id>/" prefixes. A target "<child id>/<id>" names an
/// element of that child; a plain id is looked up in the transmission first,
/// then in the children. Fault impedances are on the system base.
Trajectory tnd_dynamic_sim(const NetworkModel& transmission, std::vector<GeneratorClassical> gens,
                           std::span<const DynEvent> events, const DynConfig& cfg);

}  // namespace gridengine
