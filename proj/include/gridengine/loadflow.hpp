#pragma once

#include <limits>
#include <string>
#include <vector>

#include "gridengine/linear.hpp"
#include "gridengine/model.hpp"

namespace gridengine {

struct LoadflowConfig {
    double tolerance = 1e-8;  // pu mismatch
    int max_iterations = 50;
    bool flat_start = true;
    bool enforce_q_limits = false;

    void validate() const;
};

struct BranchFlow {
    Complex s_from;
    Complex s_to;
    bool operator==(const BranchFlow&) const = default;
};

struct SlackOutput {
    std::string bus;
    double gen_p = 0.0;
    double gen_q = 0.0;
};

struct LoadflowResult {
    bool converged = false;
    int iterations = 0;
    double max_mismatch = std::numeric_limits<double>::infinity();
    /// Per model bus (entries of out-of-service or unsolved buses echo the model).
    std::vector<std::string> bus_ids;
    std::vector<double> v_mag;
    std::vector<double> v_ang;
    std::vector<SlackOutput> slack;
    /// Per model branch.
    std::vector<std::string> branch_ids;
    std::vector<BranchFlow> flows;
};

/// ΔP for every solved non-slack bus, then ΔQ for every PQ bus, both in bus
/// order. Mismatch = specified (gen - load) minus calculated injection.
std::vector<double> compute_mismatch(const NetworkModel& net);

/// Polar Newton-Raphson. On convergence, voltages, slack output and PV
/// reactive output are written into the model; otherwise the model is left
/// exactly as it was and `converged` is false. A singular Jacobian throws
/// ErrorKind::SingularJacobian.
LoadflowResult solve_newton_raphson(NetworkModel& net, const LoadflowConfig& cfg = {});

/// S_from = V_f·conj(Yff·V_f + Yft·V_t) and the mirror for S_to, from the
/// voltages currently held by the model. Out-of-service branches carry 0.
std::vector<BranchFlow> branch_flows(const NetworkModel& net);

/// Analytic mismatch Jacobian at the model's current voltages (rows and
/// columns ordered like compute_mismatch / the state vector [θ; |V|]).
/// Exposed for verification.
Eigen::MatrixXd loadflow_jacobian(const NetworkModel& net);

/// Mutable-algorithm wrapper used with ModelHandle.
class NewtonRaphsonLoadflow {
public:
    explicit NewtonRaphsonLoadflow(LoadflowConfig cfg = {}) : cfg_(cfg) {}
    LoadflowResult apply(NetworkModel& net) const { return solve_newton_raphson(net, cfg_); }

private:
    LoadflowConfig cfg_;
};

}  // namespace gridengine
