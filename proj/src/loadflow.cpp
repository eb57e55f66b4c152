#include "gridengine/loadflow.hpp"

#include <algorithm>
#include <cmath>

#include "gridengine/topology.hpp"
#include "gridengine/ybus.hpp"

namespace gridengine {

void LoadflowConfig::validate() const
{
    if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
        throw Error(ErrorKind::InvalidValue, "loadflow tolerance must be > 0");
    }
    if (max_iterations < 1) {
        throw Error(ErrorKind::InvalidValue, "loadflow max_iterations must be >= 1");
    }
}

namespace {

constexpr int kMaxLimitPasses = 20;

struct Problem {
    AdmittanceMatrix ybus;
    std::vector<BusKind> kind;    // per dense bus (working copy)
    std::vector<Complex> s_spec;  // per dense bus
    std::vector<Complex> v;       // per dense bus
    std::vector<int> slack;
    std::vector<int> pvpq;
    std::vector<int> pq;
    std::vector<bool> solved;  // slack or equation bus

    void classify()
    {
        pvpq.clear();
        pq.clear();
        slack.clear();
        for (int k = 0; k < static_cast<int>(kind.size()); ++k) {
            if (!solved[k]) {
                continue;
            }
            switch (kind[k]) {
            case BusKind::Slack: slack.push_back(k); break;
            case BusKind::PV: pvpq.push_back(k); break;
            case BusKind::PQ:
                pvpq.push_back(k);
                pq.push_back(k);
                break;
            case BusKind::Isolated: break;
            }
        }
    }

    int size() const { return static_cast<int>(pvpq.size() + pq.size()); }
};

Problem setup(const NetworkModel& net, bool flat_start)
{
    Problem p;
    p.ybus = build_ybus(net);
    const auto buses = net.buses();
    const auto island = island_of_buses(net);
    const auto partition = find_islands(net);

    std::vector<int> island_slack(partition.islands.size(), -1);
    bool any_solvable = false;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (island[i] < 0 || buses[i].kind == BusKind::Isolated) {
            continue;
        }
        any_solvable = true;
        if (buses[i].kind == BusKind::Slack) {
            if (island_slack[island[i]] >= 0) {
                throw Error(ErrorKind::InvalidValue, "island containing bus \"" + buses[i].id +
                                                         "\" has more than one slack bus");
            }
            island_slack[island[i]] = static_cast<int>(i);
        }
    }
    if (any_solvable && std::none_of(island_slack.begin(), island_slack.end(), [](int s) { return s >= 0; })) {
        throw Error(ErrorKind::MissingSlack, "network \"" + net.id() + "\" has no in-service slack bus");
    }

    const auto n = p.ybus.model_index.size();
    p.kind.resize(n);
    p.s_spec.resize(n);
    p.v.resize(n);
    p.solved.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = p.ybus.model_index[k];
        const auto& b = buses[i];
        p.kind[k] = b.kind;
        p.s_spec[k] = Complex(b.gen_p - b.load_p, b.gen_q - b.load_q);
        const int s = island_slack[island[i]];
        p.solved[k] = s >= 0 && b.kind != BusKind::Isolated;
        if (!p.solved[k]) {
            p.v[k] = 0.0;
        } else if (!flat_start || b.kind == BusKind::Slack) {
            p.v[k] = std::polar(b.v_mag, b.v_ang);
        } else {
            const double ref = buses[static_cast<std::size_t>(s)].v_ang;
            p.v[k] = std::polar(b.kind == BusKind::PV ? b.v_mag : 1.0, ref);
        }
    }
    p.classify();
    return p;
}

DenseVector<Complex> injections(const Problem& p)
{
    const auto n = static_cast<Eigen::Index>(p.v.size());
    Eigen::Map<const DenseVector<Complex>> v(p.v.data(), n);
    DenseVector<Complex> current = p.ybus.y * v;
    DenseVector<Complex> s(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        s[k] = p.v[k] * std::conj(current[k]);
    }
    return s;
}

std::vector<double> mismatch(const Problem& p)
{
    const auto s = injections(p);
    std::vector<double> f;
    f.reserve(static_cast<std::size_t>(p.size()));
    for (int k : p.pvpq) {
        f.push_back(p.s_spec[k].real() - s[k].real());
    }
    for (int k : p.pq) {
        f.push_back(p.s_spec[k].imag() - s[k].imag());
    }
    return f;
}

double max_abs(const std::vector<double>& f)
{
    double m = 0.0;
    for (double x : f) {
        if (!std::isfinite(x)) {
            return std::numeric_limits<double>::infinity();
        }
        m = std::max(m, std::abs(x));
    }
    return m;
}

/// Jacobian of the calculated injection with respect to [θ(pvpq); |V|(pq)],
/// which is the matrix J in J·Δx = ΔS.
RealSparse jacobian(const Problem& p)
{
    const auto n = p.v.size();
    std::vector<int> theta_col(n, -1);
    std::vector<int> vm_col(n, -1);
    std::vector<int> p_row(n, -1);
    std::vector<int> q_row(n, -1);
    const int npvpq = static_cast<int>(p.pvpq.size());
    for (int j = 0; j < npvpq; ++j) {
        theta_col[p.pvpq[j]] = j;
        p_row[p.pvpq[j]] = j;
    }
    for (int j = 0; j < static_cast<int>(p.pq.size()); ++j) {
        vm_col[p.pq[j]] = npvpq + j;
        q_row[p.pq[j]] = npvpq + j;
    }

    const auto n_idx = static_cast<Eigen::Index>(n);
    Eigen::Map<const DenseVector<Complex>> v(p.v.data(), n_idx);
    const DenseVector<Complex> current = p.ybus.y * v;
    std::vector<Complex> vnorm(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double m = std::abs(p.v[k]);
        vnorm[k] = m > 0 ? p.v[k] / m : Complex(0.0);
    }

    std::vector<Eigen::Triplet<double>> triplets;
    auto stamp = [&](int bus_row, int bus_col, Complex ds_dva, Complex ds_dvm) {
        if (p_row[bus_row] >= 0) {
            if (theta_col[bus_col] >= 0) {
                triplets.emplace_back(p_row[bus_row], theta_col[bus_col], ds_dva.real());
            }
            if (vm_col[bus_col] >= 0) {
                triplets.emplace_back(p_row[bus_row], vm_col[bus_col], ds_dvm.real());
            }
        }
        if (q_row[bus_row] >= 0) {
            if (theta_col[bus_col] >= 0) {
                triplets.emplace_back(q_row[bus_row], theta_col[bus_col], ds_dva.imag());
            }
            if (vm_col[bus_col] >= 0) {
                triplets.emplace_back(q_row[bus_row], vm_col[bus_col], ds_dvm.imag());
            }
        }
    };

    const Complex j(0.0, 1.0);
    for (int c = 0; c < p.ybus.y.outerSize(); ++c) {
        for (ComplexSparse::InnerIterator it(p.ybus.y, c); it; ++it) {
            const int i = static_cast<int>(it.row());
            const int k = static_cast<int>(it.col());
            const Complex yik = it.value();
            // Off-diagonal parts of dS/dθ = j·diag(V)·conj(diag(I) - Y·diag(V))
            // and dS/d|V| = diag(V)·conj(Y·diag(V/|V|)) + conj(diag(I))·diag(V/|V|).
            stamp(i, k, -j * p.v[i] * std::conj(yik * p.v[k]), p.v[i] * std::conj(yik * vnorm[k]));
        }
    }
    for (int k = 0; k < static_cast<int>(n); ++k) {
        stamp(k, k, j * p.v[k] * std::conj(current[k]), std::conj(current[k]) * vnorm[k]);
    }

    const int m = p.size();
    RealSparse jac(m, m);
    jac.setFromTriplets(triplets.begin(), triplets.end());
    jac.makeCompressed();
    return jac;
}

struct NewtonOutcome {
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
};

NewtonOutcome newton(Problem& p, const LoadflowConfig& cfg)
{
    NewtonOutcome out;
    const int npvpq = static_cast<int>(p.pvpq.size());
    for (int iter = 0;; ++iter) {
        const auto f = mismatch(p);
        out.max_mismatch = max_abs(f);
        out.iterations = iter;
        if (out.max_mismatch <= cfg.tolerance) {
            out.converged = true;
            return out;
        }
        if (iter >= cfg.max_iterations || !std::isfinite(out.max_mismatch)) {
            return out;
        }
        RealFactorization fact;
        try {
            fact = RealFactorization::factorize(jacobian(p));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Singular) {
                throw Error(ErrorKind::SingularJacobian, "singular Jacobian at iteration " + std::to_string(iter));
            }
            throw;
        }
        std::vector<double> dx;
        try {
            dx = fact.solve(std::span<const double>(f));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Singular) {
                throw Error(ErrorKind::SingularJacobian, "singular Jacobian at iteration " + std::to_string(iter));
            }
            throw;
        }
        for (int a = 0; a < npvpq; ++a) {
            const int k = p.pvpq[a];
            p.v[k] = std::polar(std::abs(p.v[k]), std::arg(p.v[k]) + dx[a]);
        }
        for (int a = 0; a < static_cast<int>(p.pq.size()); ++a) {
            const int k = p.pq[a];
            p.v[k] = std::polar(std::abs(p.v[k]) + dx[npvpq + a], std::arg(p.v[k]));
        }
    }
}

/// Switches PV buses whose reactive output sits outside [q_min, q_max] to PQ
/// at the violated limit. Returns true when anything switched.
bool apply_q_limits(Problem& p, const NetworkModel& net)
{
    const auto s = injections(p);
    bool switched = false;
    for (int k : p.pvpq) {
        if (p.kind[k] != BusKind::PV) {
            continue;
        }
        const auto& b = net.buses()[p.ybus.model_index[k]];
        if (!(b.q_max > b.q_min)) {
            continue;
        }
        const double q_gen = s[k].imag() + b.load_q;
        double limit = 0.0;
        if (q_gen > b.q_max) {
            limit = b.q_max;
        } else if (q_gen < b.q_min) {
            limit = b.q_min;
        } else {
            continue;
        }
        p.kind[k] = BusKind::PQ;
        p.s_spec[k] = Complex(p.s_spec[k].real(), limit - b.load_q);
        switched = true;
    }
    if (switched) {
        p.classify();
    }
    return switched;
}

}  // namespace

std::vector<double> compute_mismatch(const NetworkModel& net)
{
    const auto p = setup(net, false);
    return mismatch(p);
}

Eigen::MatrixXd loadflow_jacobian(const NetworkModel& net)
{
    const auto p = setup(net, false);
    return Eigen::MatrixXd(jacobian(p));
}

LoadflowResult solve_newton_raphson(NetworkModel& net, const LoadflowConfig& cfg)
{
    cfg.validate();
    auto p = setup(net, cfg.flat_start);

    NewtonOutcome outcome;
    int total_iterations = 0;
    for (int pass = 0; pass < kMaxLimitPasses; ++pass) {
        outcome = newton(p, cfg);
        total_iterations += outcome.iterations;
        if (!outcome.converged || !cfg.enforce_q_limits || !apply_q_limits(p, net)) {
            break;
        }
    }

    LoadflowResult result;
    result.converged = outcome.converged;
    result.iterations = total_iterations;
    result.max_mismatch = outcome.max_mismatch;

    if (result.converged) {
        const auto s = injections(p);
        for (std::size_t k = 0; k < p.v.size(); ++k) {
            if (!p.solved[k]) {
                continue;
            }
            auto& b = net.bus_at(p.ybus.model_index[k]);
            b.v_mag = std::abs(p.v[k]);
            b.v_ang = std::arg(p.v[k]);
            if (p.kind[k] == BusKind::Slack) {
                b.gen_p = s[k].real() + b.load_p;
                b.gen_q = s[k].imag() + b.load_q;
                result.slack.push_back({b.id, b.gen_p, b.gen_q});
            } else if (b.kind == BusKind::PV) {
                b.gen_q = p.kind[k] == BusKind::PV ? s[k].imag() + b.load_q : p.s_spec[k].imag() + b.load_q;
                if (p.kind[k] != b.kind) {
                    b.kind = p.kind[k];
                }
            }
        }
        result.flows = branch_flows(net);
    }

    for (const auto& b : net.buses()) {
        result.bus_ids.push_back(b.id);
        result.v_mag.push_back(b.v_mag);
        result.v_ang.push_back(b.v_ang);
    }
    for (const auto& br : net.branches()) {
        result.branch_ids.push_back(br.id);
    }
    if (!result.converged) {
        result.flows.assign(net.branches().size(), BranchFlow{});
    }
    return result;
}

std::vector<BranchFlow> branch_flows(const NetworkModel& net)
{
    std::vector<BranchFlow> flows;
    flows.reserve(net.branches().size());
    for (const auto& br : net.branches()) {
        const auto& f = net.bus(br.from_bus);
        const auto& t = net.bus(br.to_bus);
        if (!br.in_service || !f.in_service || !t.in_service) {
            flows.push_back({});
            continue;
        }
        const auto s = branch_stamp(br);
        const Complex vf = std::polar(f.v_mag, f.v_ang);
        const Complex vt = std::polar(t.v_mag, t.v_ang);
        flows.push_back({vf * std::conj(s.yff * vf + s.yft * vt), vt * std::conj(s.ytf * vf + s.ytt * vt)});
    }
    return flows;
}

}  // namespace gridengine
