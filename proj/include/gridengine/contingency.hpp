#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridengine/linear.hpp"
#include "gridengine/model.hpp"
#include "gridengine/ybus.hpp"

namespace gridengine {

inline constexpr double kIslandingThreshold = 1e-6;

struct DcFlowResult {
    std::vector<double> angles;  // per model bus, rad (0 for out-of-service)
    std::vector<double> flows;   // per model branch, pu (0 for out-of-service)
};

/// Solves B'θ = P with the slack rows removed (θ_slack = 0) and reports
/// flow = (θ_f - θ_t)/x. Injections are gen_p - load_p.
DcFlowResult dc_power_flow(const NetworkModel& net);

struct ContingencySpec {
    std::string id;
    std::string outaged_branch;
    bool operator==(const ContingencySpec&) const = default;
};

struct OutageFactors {
    bool islanding = false;
    /// Per model branch; empty when islanding.
    std::vector<double> lodf;
    std::vector<double> post_flows;
};

/// Base-case DC solution with the factorized B' matrix, shared read-only by
/// every outage evaluation.
class DcSensitivity {
public:
    explicit DcSensitivity(const NetworkModel& net);

    const std::vector<double>& base_flows() const noexcept { return base_.flows; }
    const std::vector<double>& base_angles() const noexcept { return base_.angles; }

    /// LODF_m,o = PTDF_m,o / (1 - PTDF_o,o); islanding when the denominator's
    /// magnitude is at or below kIslandingThreshold. Throws UnknownBranch, or
    /// InvalidValue for an out-of-service outage branch.
    OutageFactors outage(std::string_view branch_id) const;

private:
    struct BranchTerms {
        int from = -1;  // reduced index, -1 for slack / removed
        int to = -1;
        double x = 0.0;
        bool active = false;
    };

    const NetworkModel* net_;
    SusceptanceMatrix bprime_;
    RealFactorization factors_;
    DcFlowResult base_;
    std::vector<BranchTerms> terms_;
};

OutageFactors compute_lodf(const NetworkModel& net, std::string_view outage);

struct Violation {
    std::string branch;
    double flow = 0.0;  // |post-contingency flow|, pu
    double rating = 0.0;
    bool operator==(const Violation&) const = default;
};

struct CaResult {
    std::string contingency;
    bool islanding = false;
    std::vector<double> post_flows;  // per model branch; empty when islanding
    std::vector<Violation> violations;
    std::optional<std::string> error;
    bool operator==(const CaResult&) const = default;
};

/// N-1 screening. Read-only on the model; contingencies are split into
/// static contiguous blocks over `workers` threads and results come back in
/// spec order. A bad spec is reported in its own result and does not stop
/// the others.
std::vector<CaResult> run_n1(const NetworkModel& net, std::span<const ContingencySpec> specs, int workers);

/// One contingency per in-service branch, in branch order.
std::vector<ContingencySpec> all_branch_outages(const NetworkModel& net);

/// Immutable-algorithm wrapper used with ModelHandle.
class ContingencyScreening {
public:
    ContingencyScreening(std::vector<ContingencySpec> specs, int workers)
        : specs_(std::move(specs)), workers_(workers)
    {
    }
    std::vector<CaResult> apply(const NetworkModel& net) const { return run_n1(net, specs_, workers_); }

private:
    std::vector<ContingencySpec> specs_;
    int workers_;
};

}  // namespace gridengine
