#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridengine/linear.hpp"
#include "gridengine/loadflow.hpp"
#include "gridengine/model.hpp"

namespace gridengine {

/// Classical machine: constant E' behind x'd with a swing equation.
/// h, d and xd_p are inputs; e_mag, delta and p_mech are set by
/// init_dynamics; delta and omega_dev evolve.
struct GeneratorClassical {
    std::string bus;
    double h = 0.0;
    double d = 0.0;
    double xd_p = 0.0;
    double e_mag = 0.0;
    double delta = 0.0;
    double omega_dev = 0.0;
    double p_mech = 0.0;
    bool operator==(const GeneratorClassical&) const = default;
};

/// One generator per bus that carries MachineData (Dynamics layer).
std::vector<GeneratorClassical> generators_from_model(const NetworkModel& net);

enum class DynEventKind { ApplyBusFault, ClearBusFault, TripBranch };

const char* to_string(DynEventKind kind) noexcept;
std::optional<DynEventKind> dyn_event_kind_from_string(std::string_view text) noexcept;

struct DynEvent {
    double time = 0.0;
    DynEventKind kind = DynEventKind::ApplyBusFault;
    std::string target;  // bus id for faults, branch id for trips
    Complex z_fault;     // faults only; 0 is a bolted fault
    bool operator==(const DynEvent&) const = default;
};

/// Checks times (non-negative, sorted) and that every ClearBusFault follows
/// an ApplyBusFault on the same bus. A fault without a clear stays applied.
void validate_events(std::span<const DynEvent> events);

struct DynConfig {
    double dt = 0.005;  // s
    double t_end = 1.0;  // s
    void validate() const;
};

/// Constant-admittance network of one (sub)system used during integration.
///
/// Loads are frozen as y = conj(S_load)/|V0|². Generation at buses without a
/// machine is frozen the same way as a negative load, except at ports where
/// the port current stands in for it. Slack buses without a machine that are
/// not ports are ideal sources held at their initial voltage; a bolted fault
/// holds its bus at 0. Machines add 1/(j·x'd) and inject E/(j·x'd). Ports are
/// buses where external currents (from MATE coupling) are injected.
class DynamicNetwork {
public:
    DynamicNetwork(const NetworkModel& net, std::span<const Complex> initial_voltages,
                   std::span<const GeneratorClassical> gens, std::vector<std::string> ports = {});

    /// Copy with one event applied and the network re-factorized.
    DynamicNetwork with_event(const DynEvent& event) const;

    /// Bus voltages (per model bus; 0 for out-of-service buses) for machine
    /// EMFs E∠δ (one per generator) and currents injected at the ports.
    std::vector<Complex> solve(std::span<const Complex> emf, std::span<const Complex> port_injection = {}) const;

    /// Port voltages with zero port current.
    std::vector<Complex> open_circuit_port_voltages(std::span<const Complex> emf) const;
    /// Driving-point and transfer impedances between ports (n_ports²).
    const Eigen::MatrixXcd& port_impedance() const noexcept { return port_z_; }

    /// Re(E·conj((E − V_bus)/(j·x'd))) per generator.
    std::vector<double> electrical_power(std::span<const Complex> emf, std::span<const Complex> voltages) const;

    /// Voltage angles of the ideal sources (infinite buses), used as angle
    /// references for the stability verdict.
    std::vector<double> reference_angles() const;

    const std::vector<std::string>& ports() const noexcept { return port_ids_; }
    const NetworkModel& model() const noexcept { return *net_; }
    std::size_t generator_count() const noexcept { return gen_bus_.size(); }

private:
    void rebuild();

    std::shared_ptr<const NetworkModel> net_;
    std::vector<Complex> y_frozen_;                  // per model bus
    std::map<std::size_t, Complex> faults_;          // model bus -> z_fault
    std::map<std::size_t, Complex> ideal_sources_;   // model bus -> held voltage
    std::vector<std::size_t> gen_bus_;               // per generator, model bus index
    std::vector<double> gen_xd_;
    std::vector<std::string> port_ids_;
    std::vector<std::size_t> port_bus_;

    // Derived by rebuild().
    std::vector<int> unknown_index_;                 // model bus -> unknown index, -1 otherwise
    std::vector<Complex> fixed_voltage_;             // per model bus (0 unless held)
    DenseVector<Complex> fixed_rhs_;                 // -Y_uf·V_f
    ComplexFactorization factors_;
    Eigen::MatrixXcd port_z_;
};

struct DynState {
    double time = 0.0;
    std::vector<GeneratorClassical> gens;
    /// Per model bus.
    std::vector<Complex> voltages;
    /// Electrical output per generator at `time`.
    std::vector<double> p_elec;
    std::shared_ptr<const DynamicNetwork> network;
    /// Nominal angular frequency ω_s = 2π·f.
    double omega_s = 0.0;
};

/// Classical initialization from a converged loadflow:
/// E'∠δ = V_t + j·x'd·conj(S_gen/V_t), Δω = 0, loads frozen as constant
/// admittance, p_mech = electrical output of the t = 0 network solution.
/// The returned voltages are the loadflow voltages.
DynState init_dynamics(const NetworkModel& net, const LoadflowResult& lf, std::vector<GeneratorClassical> gens);

/// Sets e_mag and delta of every generator from its bus voltage and the bus
/// generation (E'∠δ = V_t + j·x'd·conj(S_gen/V_t)); resets omega_dev.
void initialize_machines(const NetworkModel& net, std::span<const Complex> voltages,
                         std::vector<GeneratorClassical>& gens);

/// Machine states after one trapezoidal step given the electrical power at
/// the start of the step and a network solution for trial rotor angles.
/// The implicit step is solved by fixed-point iteration until successive
/// iterates differ by at most 1e-10. Returns p_elec at the end of the step.
using NetworkPowerSolve = std::function<std::vector<double>(std::span<const GeneratorClassical>)>;
std::vector<double> advance_machines(std::vector<GeneratorClassical>& gens, std::span<const double> p_elec_start,
                                     double dt, double omega_s, const NetworkPowerSolve& solve);

/// One trapezoidal step of dδ/dt = ω_s·Δω, dΔω/dt = (p_mech − p_elec − d·Δω)/(2h).
DynState integrate_step(const DynState& state, double dt);

/// New state with one event applied to the network (the rotor state is
/// continuous; voltages and p_elec jump).
DynState apply_event(const DynState& state, const DynEvent& event);

struct Trajectory {
    std::vector<double> time;
    std::vector<std::string> generators;   // generator bus ids
    std::vector<std::vector<double>> delta;      // [gen][sample], rad
    std::vector<std::vector<double>> omega_dev;  // [gen][sample], pu
    std::vector<std::string> buses;
    std::vector<std::vector<double>> v_mag;      // [bus][sample], pu
    bool stable = true;
    std::optional<double> instability_time;
};

/// Records the state as sample `time`; sets the verdict when the spread of
/// rotor and reference angles exceeds π.
void record_sample(Trajectory& traj, const DynState& state);

/// Fixed-step simulation from t = 0 to t_end. Events are snapped to the
/// nearest step boundary (timing error at most dt/2) and applied before
/// that step; events after t_end are ignored. Throws UnknownBus /
/// UnknownBranch for bad event targets.
Trajectory run_dynamics(const NetworkModel& net, const LoadflowResult& lf, std::vector<GeneratorClassical> gens,
                        std::span<const DynEvent> events, const DynConfig& cfg);

/// Step index an event time snaps to.
long snap_to_step(double time, double dt);

}  // namespace gridengine
