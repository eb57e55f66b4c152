#include "gridengine/contingency.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "gridengine/topology.hpp"

namespace gridengine {

namespace {

void require_slack_per_island(const NetworkModel& net)
{
    const auto partition = find_islands(net);
    for (std::size_t k = 0; k < partition.islands.size(); ++k) {
        if (!partition.energized[k]) {
            throw Error(ErrorKind::MissingSlack,
                        "island containing bus \"" + partition.islands[k].front() + "\" has no slack bus");
        }
    }
}

DcFlowResult solve_dc(const NetworkModel& net, const SusceptanceMatrix& bprime, const RealFactorization& factors)
{
    const auto buses = net.buses();
    DenseVector<double> injection(static_cast<Eigen::Index>(bprime.model_index.size()));
    for (std::size_t k = 0; k < bprime.model_index.size(); ++k) {
        const auto& b = buses[bprime.model_index[k]];
        injection[static_cast<Eigen::Index>(k)] = b.gen_p - b.load_p;
    }
    const auto theta = factors.solve(injection);

    DcFlowResult out;
    out.angles.assign(buses.size(), 0.0);
    for (std::size_t k = 0; k < bprime.model_index.size(); ++k) {
        out.angles[bprime.model_index[k]] = theta[static_cast<Eigen::Index>(k)];
    }
    out.flows.assign(net.branches().size(), 0.0);
    for (std::size_t m = 0; m < net.branches().size(); ++m) {
        const auto& br = net.branches()[m];
        const auto f = net.bus_index(br.from_bus);
        const auto t = net.bus_index(br.to_bus);
        if (br.in_service && buses[f].in_service && buses[t].in_service) {
            out.flows[m] = (out.angles[f] - out.angles[t]) / br.x;
        }
    }
    return out;
}

RealFactorization factorize_bprime(const SusceptanceMatrix& bprime)
{
    try {
        return RealFactorization::factorize(bprime.b);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Singular) {
            throw Error(ErrorKind::Singular, std::string("DC susceptance matrix is singular: ") + e.what());
        }
        throw;
    }
}

}  // namespace

DcFlowResult dc_power_flow(const NetworkModel& net)
{
    require_slack_per_island(net);
    const auto bprime = build_bprime(net, true);
    return solve_dc(net, bprime, factorize_bprime(bprime));
}

DcSensitivity::DcSensitivity(const NetworkModel& net) : net_(&net)
{
    require_slack_per_island(net);
    bprime_ = build_bprime(net, true);
    factors_ = factorize_bprime(bprime_);
    base_ = solve_dc(net, bprime_, factors_);

    const auto buses = net.buses();
    terms_.resize(net.branches().size());
    for (std::size_t m = 0; m < terms_.size(); ++m) {
        const auto& br = net.branches()[m];
        const auto f = net.bus_index(br.from_bus);
        const auto t = net.bus_index(br.to_bus);
        auto& term = terms_[m];
        term.active = br.in_service && buses[f].in_service && buses[t].in_service;
        term.from = bprime_.reduced_index[f];
        term.to = bprime_.reduced_index[t];
        term.x = br.x;
    }
}

OutageFactors DcSensitivity::outage(std::string_view branch_id) const
{
    const auto o = net_->branch_index(branch_id);
    if (!terms_[o].active) {
        throw Error(ErrorKind::InvalidValue, "outage branch \"" + std::string(branch_id) + "\" is not in service");
    }

    const auto n = static_cast<Eigen::Index>(bprime_.model_index.size());
    DenseVector<double> rhs = DenseVector<double>::Zero(n);
    if (terms_[o].from >= 0) {
        rhs[terms_[o].from] += 1.0;
    }
    if (terms_[o].to >= 0) {
        rhs[terms_[o].to] -= 1.0;
    }
    const auto dtheta = factors_.solve(rhs);
    auto angle = [&](int reduced) { return reduced >= 0 ? dtheta[reduced] : 0.0; };

    std::vector<double> ptdf(terms_.size(), 0.0);
    for (std::size_t m = 0; m < terms_.size(); ++m) {
        if (terms_[m].active) {
            ptdf[m] = (angle(terms_[m].from) - angle(terms_[m].to)) / terms_[m].x;
        }
    }

    OutageFactors out;
    const double denominator = 1.0 - ptdf[o];
    // Series-compensated branches (x < 0) make the denominator legitimately
    // negative, so only its magnitude signals a cut branch.
    if (std::abs(denominator) <= kIslandingThreshold) {
        out.islanding = true;
        return out;
    }
    out.lodf.assign(terms_.size(), 0.0);
    out.post_flows.assign(terms_.size(), 0.0);
    const double pre_outage = base_.flows[o];
    for (std::size_t m = 0; m < terms_.size(); ++m) {
        if (!terms_[m].active) {
            continue;
        }
        if (m == o) {
            out.lodf[m] = -1.0;
            continue;
        }
        out.lodf[m] = ptdf[m] / denominator;
        out.post_flows[m] = base_.flows[m] + out.lodf[m] * pre_outage;
    }
    return out;
}

OutageFactors compute_lodf(const NetworkModel& net, std::string_view outage)
{
    return DcSensitivity(net).outage(outage);
}

std::vector<ContingencySpec> all_branch_outages(const NetworkModel& net)
{
    std::vector<ContingencySpec> specs;
    for (const auto& br : net.branches()) {
        if (br.in_service) {
            specs.push_back({"N-1:" + br.id, br.id});
        }
    }
    return specs;
}

std::vector<CaResult> run_n1(const NetworkModel& net, std::span<const ContingencySpec> specs, int workers)
{
    if (workers < 1) {
        throw Error(ErrorKind::InvalidValue, "worker count must be >= 1");
    }
    std::vector<CaResult> results(specs.size());
    if (specs.empty()) {
        return results;
    }
    const DcSensitivity sensitivity(net);
    const auto branches = net.branches();

    auto evaluate = [&](std::size_t k) {
        CaResult& r = results[k];
        r.contingency = specs[k].id;
        try {
            auto factors = sensitivity.outage(specs[k].outaged_branch);
            r.islanding = factors.islanding;
            r.post_flows = std::move(factors.post_flows);
            for (std::size_t m = 0; m < r.post_flows.size(); ++m) {
                const double rating = branches[m].rating;
                const double flow = std::abs(r.post_flows[m]);
                if (rating > 0.0 && flow > rating) {
                    r.violations.push_back({branches[m].id, flow, rating});
                }
            }
        } catch (const Error& e) {
            r.error = e.what();
        }
    };

    const auto count = specs.size();
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
    if (threads == 1) {
        for (std::size_t k = 0; k < count; ++k) {
            evaluate(k);
        }
        return results;
    }
    const auto block = (count + threads - 1) / threads;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        const auto begin = w * block;
        const auto end = std::min(count, begin + block);
        pool.emplace_back([&evaluate, begin, end] {
            for (auto k = begin; k < end; ++k) {
                evaluate(k);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    return results;
}

}  // namespace gridengine
