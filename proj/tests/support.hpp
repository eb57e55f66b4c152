#pragma once

// Shared fixtures and independent reference calculations for the tests.
// The oracles here deliberately avoid the engine's own algorithms: dense
// Gauss-Jordan instead of sparse LU, hand-merged networks instead of
// boundary exchange, explicit RK4 instead of the trapezoidal stepper.

#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gridengine/dynamics.hpp"
#include "gridengine/model.hpp"

namespace support {

using gridengine::Complex;

/// Kind of the gridengine::Error thrown by `f`, or nullopt when it returns.
template <class F>
std::optional<gridengine::ErrorKind> error_kind(F&& f)
{
    try {
        f();
    } catch (const gridengine::Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

/// Message of the gridengine::Error thrown by `f` (empty when none).
template <class F>
std::string error_message(F&& f)
{
    try {
        f();
    } catch (const gridengine::Error& e) {
        return e.what();
    }
    return {};
}

using CMatrix = std::vector<std::vector<Complex>>;

std::string data_path(const std::string& name);
gridengine::NetworkModel load_cdf_fixture(const std::string& name);

gridengine::Bus bus(std::string id, gridengine::BusKind kind = gridengine::BusKind::PQ);
gridengine::Branch line(std::string id, std::string from, std::string to, double r, double x, double b = 0.0);

/// Bus 1 slack at 1∠0, line 1-2 with reactance x, load p + jq at bus 2.
gridengine::NetworkModel two_bus(double x, double p_load, double q_load = 0.0);

/// Buses 1, 2, 3 (3 is slack), branches 1-2, 1-3, 2-3 with reactance x,
/// +1 pu injected at bus 1 and absorbed by the slack.
gridengine::NetworkModel triangle(double x = 0.1, double rating = 0.0);

/// One machine (bus 2, generating p_gen with Q = 0) behind line x to an
/// infinite bus (bus 1, slack at 1∠0).
gridengine::NetworkModel omib(double x_line, double xd_p, double h, double d, double p_gen);

/// Random connected network with `n` buses, bus "1" slack, PV and PQ buses,
/// loads small enough to solve. Layer AcLoadflow.
gridengine::NetworkModel random_network(std::mt19937_64& rng, int n, bool with_taps);

/// Radial feeder on its own MVA base with head bus "H" as slack and
/// `sections` load buses.
gridengine::NetworkModel radial_feeder(const std::string& id, int sections, double base_mva, double load_p,
                                       double load_q, double charging = 0.001);

/// IEEE 14-bus fixture with three feeders attached at buses 9, 13 and 14.
gridengine::NetworkModel tnd_miniature();

/// Monolithic equivalent of a network with children: child buses are
/// renamed "<child id>/<bus id>", each child's boundary bus is merged into
/// its parent bus, and child per-unit data are converted to the parent base.
gridengine::NetworkModel merge_children(const gridengine::NetworkModel& net);

/// Dense Gauss-Jordan inverse with partial pivoting.
CMatrix dense_inverse(CMatrix a);

/// Dense node admittance matrix in model bus order, stamped from the
/// textbook branch formulas.
CMatrix dense_ybus(const gridengine::NetworkModel& net);

/// Rotor angle of the classical machine from the phasor diagram:
/// E' = V + j·x'd·I with I = conj(S/V).
double phasor_diagram_delta(Complex v_terminal, Complex s_gen, double xd_p);

/// Classical OMIB swing equation integrated with fixed-step RK4.
struct OmibOracle {
    double h = 0.0;
    double d = 0.0;
    double p_mech = 0.0;
    double omega_s = 0.0;
    double p_max_pre = 0.0;    // E·V∞/x_total before the fault and after clearing
    double p_max_fault = 0.0;  // during the fault
    double t_fault = 0.0;
    double t_clear = 0.0;  // infinity: never cleared
};

struct OmibSample {
    double time = 0.0;
    double delta = 0.0;
    double omega_dev = 0.0;
};

std::vector<OmibSample> integrate_omib_rk4(const OmibOracle& sys, double delta0, double omega0, double dt,
                                           double t_end);

}  // namespace support
