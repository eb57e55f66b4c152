#include "gridengine/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "gridengine/ybus.hpp"

namespace gridengine {

namespace {

constexpr double kStepTolerance = 1e-10;
constexpr int kMaxStepIterations = 100;
constexpr Complex kJ{0.0, 1.0};

bool is_bolted(Complex z) { return std::abs(z) == 0.0; }

std::vector<Complex> emfs(std::span<const GeneratorClassical> gens)
{
    std::vector<Complex> e(gens.size());
    for (std::size_t g = 0; g < gens.size(); ++g) {
        e[g] = std::polar(gens[g].e_mag, gens[g].delta);
    }
    return e;
}

}  // namespace

std::vector<GeneratorClassical> generators_from_model(const NetworkModel& net)
{
    std::vector<GeneratorClassical> gens;
    for (const auto& bus : net.buses()) {
        if (bus.machine && bus.in_service) {
            GeneratorClassical g;
            g.bus = bus.id;
            g.h = bus.machine->h;
            g.d = bus.machine->d;
            g.xd_p = bus.machine->xd_p;
            gens.push_back(g);
        }
    }
    return gens;
}

const char* to_string(DynEventKind kind) noexcept
{
    switch (kind) {
    case DynEventKind::ApplyBusFault: return "ApplyBusFault";
    case DynEventKind::ClearBusFault: return "ClearBusFault";
    case DynEventKind::TripBranch: return "TripBranch";
    }
    return "?";
}

std::optional<DynEventKind> dyn_event_kind_from_string(std::string_view text) noexcept
{
    for (auto k : {DynEventKind::ApplyBusFault, DynEventKind::ClearBusFault, DynEventKind::TripBranch}) {
        if (text == to_string(k)) {
            return k;
        }
    }
    return std::nullopt;
}

void validate_events(std::span<const DynEvent> events)
{
    std::set<std::string> faulted;
    double previous = 0.0;
    for (const auto& ev : events) {
        if (!std::isfinite(ev.time) || ev.time < 0.0) {
            throw Error(ErrorKind::InvalidValue, "event time must be >= 0 (event on \"" + ev.target + "\")");
        }
        if (ev.time < previous) {
            throw Error(ErrorKind::InvalidValue, "events are not sorted by time (event on \"" + ev.target + "\")");
        }
        previous = ev.time;
        if (ev.kind == DynEventKind::ApplyBusFault) {
            if (!detail::is_finite(ev.z_fault)) {
                throw Error(ErrorKind::InvalidValue, "fault impedance at \"" + ev.target + "\" is not finite");
            }
            faulted.insert(ev.target);
        } else if (ev.kind == DynEventKind::ClearBusFault) {
            if (faulted.erase(ev.target) == 0) {
                throw Error(ErrorKind::InvalidValue,
                            "ClearBusFault at \"" + ev.target + "\" has no earlier ApplyBusFault");
            }
        }
    }
}

void DynConfig::validate() const
{
    if (!(dt > 0.0) || dt > 0.02) {
        throw Error(ErrorKind::InvalidValue, "dynamics dt must be in (0, 0.02] s");
    }
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw Error(ErrorKind::InvalidValue, "dynamics t_end must be > 0");
    }
}

// ---- DynamicNetwork --------------------------------------------------------

DynamicNetwork::DynamicNetwork(const NetworkModel& net, std::span<const Complex> initial_voltages,
                               std::span<const GeneratorClassical> gens, std::vector<std::string> ports)
    : net_(std::make_shared<NetworkModel>(net)), port_ids_(std::move(ports))
{
    require_layer(net, Layer::AcLoadflow, "dynamic simulation");
    const auto buses = net.buses();
    if (initial_voltages.size() != buses.size()) {
        throw Error(ErrorKind::InvalidValue, "initial voltage vector does not match the bus count");
    }
    std::set<std::size_t> machine_buses;
    for (const auto& g : gens) {
        const auto idx = net.bus_index(g.bus);
        if (!machine_buses.insert(idx).second) {
            throw Error(ErrorKind::DuplicateId, "more than one generator at bus \"" + g.bus + "\"");
        }
        if (!(g.xd_p > 0.0) || !(g.h > 0.0)) {
            throw Error(ErrorKind::InvalidValue, "generator at bus \"" + g.bus + "\" needs h > 0 and xd_p > 0");
        }
        gen_bus_.push_back(idx);
        gen_xd_.push_back(g.xd_p);
    }
    std::set<std::size_t> port_set;
    for (const auto& p : port_ids_) {
        port_bus_.push_back(net.bus_index(p));
        port_set.insert(port_bus_.back());
    }

    y_frozen_.assign(buses.size(), Complex{});
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const auto& b = buses[i];
        if (!b.in_service || b.kind == BusKind::Isolated) {
            continue;
        }
        const bool machine = machine_buses.contains(i);
        const bool port = port_set.contains(i);
        if (b.kind == BusKind::Slack && !machine && !port) {
            ideal_sources_[i] = initial_voltages[i];
            continue;
        }
        Complex s(b.load_p, b.load_q);
        if (!machine && !port) {
            s -= Complex(b.gen_p, b.gen_q);
        }
        if (s == Complex{}) {
            continue;
        }
        const double v2 = std::norm(initial_voltages[i]);
        if (!(v2 > 0.0)) {
            throw Error(ErrorKind::InvalidValue, "bus \"" + b.id + "\" has load but zero initial voltage");
        }
        y_frozen_[i] = std::conj(s) / v2;
    }
    rebuild();
}

void DynamicNetwork::rebuild()
{
    const auto& net = *net_;
    const auto ybus = build_ybus(net);
    const auto n_model = net.buses().size();
    const auto n = ybus.dimension();

    fixed_voltage_.assign(n_model, Complex{});
    std::vector<bool> fixed(n_model, false);
    for (const auto& [bus, v] : ideal_sources_) {
        fixed[bus] = true;
        fixed_voltage_[bus] = v;
    }
    DenseVector<Complex> diag = DenseVector<Complex>::Zero(n);
    for (std::size_t i = 0; i < n_model; ++i) {
        if (ybus.dense_index[i] >= 0) {
            diag[ybus.dense_index[i]] += y_frozen_[i];
        }
    }
    for (std::size_t g = 0; g < gen_bus_.size(); ++g) {
        if (ybus.dense_index[gen_bus_[g]] >= 0) {
            diag[ybus.dense_index[gen_bus_[g]]] += 1.0 / (kJ * gen_xd_[g]);
        }
    }
    for (const auto& [bus, z] : faults_) {
        if (ybus.dense_index[bus] < 0) {
            continue;
        }
        if (is_bolted(z)) {
            if (ideal_sources_.contains(bus)) {
                throw Error(ErrorKind::Singular,
                            "bolted fault at ideal source bus \"" + net.buses()[bus].id + "\"");
            }
            fixed[bus] = true;
            fixed_voltage_[bus] = 0.0;
        } else {
            diag[ybus.dense_index[bus]] += 1.0 / z;
        }
    }

    unknown_index_.assign(n_model, -1);
    std::vector<int> dense_unknown(static_cast<std::size_t>(n), -1);
    int m = 0;
    for (int k = 0; k < n; ++k) {
        const auto i = ybus.model_index[static_cast<std::size_t>(k)];
        if (!fixed[i]) {
            unknown_index_[i] = m;
            dense_unknown[static_cast<std::size_t>(k)] = m++;
        }
    }

    std::vector<Eigen::Triplet<Complex>> triplets;
    fixed_rhs_ = DenseVector<Complex>::Zero(m);
    for (int col = 0; col < ybus.y.outerSize(); ++col) {
        for (ComplexSparse::InnerIterator it(ybus.y, col); it; ++it) {
            const int r = dense_unknown[static_cast<std::size_t>(it.row())];
            if (r < 0) {
                continue;
            }
            const int c = dense_unknown[static_cast<std::size_t>(it.col())];
            if (c >= 0) {
                triplets.emplace_back(r, c, it.value());
            } else {
                fixed_rhs_[r] -= it.value() * fixed_voltage_[ybus.model_index[static_cast<std::size_t>(it.col())]];
            }
        }
    }
    for (int k = 0; k < n; ++k) {
        const int u = dense_unknown[static_cast<std::size_t>(k)];
        if (u >= 0 && diag[k] != Complex{}) {
            triplets.emplace_back(u, u, diag[k]);
        }
    }
    ComplexSparse y_uu(m, m);
    y_uu.setFromTriplets(triplets.begin(), triplets.end());
    try {
        factors_ = ComplexFactorization::factorize(y_uu);
    } catch (const Error& e) {
        throw Error(ErrorKind::Singular, "dynamic network of \"" + net.id() + "\" is singular: " + e.what());
    }

    const auto ports = port_bus_.size();
    port_z_ = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(ports), static_cast<Eigen::Index>(ports));
    for (std::size_t k = 0; k < ports; ++k) {
        const int u = unknown_index_[port_bus_[k]];
        if (u < 0) {
            continue;  // held bus: no response to injected current
        }
        DenseVector<Complex> rhs = DenseVector<Complex>::Zero(m);
        rhs[u] = 1.0;
        const auto col = factors_.solve(rhs);
        for (std::size_t r = 0; r < ports; ++r) {
            const int ur = unknown_index_[port_bus_[r]];
            if (ur >= 0) {
                port_z_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = col[ur];
            }
        }
    }
}

DynamicNetwork DynamicNetwork::with_event(const DynEvent& event) const
{
    DynamicNetwork next = *this;
    switch (event.kind) {
    case DynEventKind::ApplyBusFault: {
        const auto bus = net_->bus_index(event.target);
        next.faults_[bus] = event.z_fault;
        break;
    }
    case DynEventKind::ClearBusFault: {
        const auto bus = net_->bus_index(event.target);
        if (next.faults_.erase(bus) == 0) {
            throw Error(ErrorKind::InvalidValue, "no fault to clear at bus \"" + event.target + "\"");
        }
        break;
    }
    case DynEventKind::TripBranch: {
        const auto idx = net_->branch_index(event.target);
        auto copy = std::make_shared<NetworkModel>(*net_);
        copy->branch_at(idx).in_service = false;
        next.net_ = std::move(copy);
        break;
    }
    }
    next.rebuild();
    return next;
}

std::vector<Complex> DynamicNetwork::solve(std::span<const Complex> emf, std::span<const Complex> port_injection) const
{
    if (emf.size() != gen_bus_.size()) {
        throw Error(ErrorKind::InvalidValue, "EMF vector does not match the generator count");
    }
    if (!port_injection.empty() && port_injection.size() != port_bus_.size()) {
        throw Error(ErrorKind::InvalidValue, "port injection vector does not match the port count");
    }
    DenseVector<Complex> rhs = fixed_rhs_;
    for (std::size_t g = 0; g < gen_bus_.size(); ++g) {
        const int u = unknown_index_[gen_bus_[g]];
        if (u >= 0) {
            rhs[u] += emf[g] / (kJ * gen_xd_[g]);
        }
    }
    for (std::size_t k = 0; k < port_injection.size(); ++k) {
        const int u = unknown_index_[port_bus_[k]];
        if (u >= 0) {
            rhs[u] += port_injection[k];
        }
    }
    const auto x = factors_.solve(rhs);
    std::vector<Complex> v = fixed_voltage_;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (unknown_index_[i] >= 0) {
            v[i] = x[unknown_index_[i]];
        }
    }
    return v;
}

std::vector<Complex> DynamicNetwork::open_circuit_port_voltages(std::span<const Complex> emf) const
{
    const auto v = solve(emf);
    std::vector<Complex> out(port_bus_.size());
    for (std::size_t k = 0; k < port_bus_.size(); ++k) {
        out[k] = v[port_bus_[k]];
    }
    return out;
}

std::vector<double> DynamicNetwork::electrical_power(std::span<const Complex> emf,
                                                     std::span<const Complex> voltages) const
{
    std::vector<double> p(gen_bus_.size());
    for (std::size_t g = 0; g < gen_bus_.size(); ++g) {
        const Complex current = (emf[g] - voltages[gen_bus_[g]]) / (kJ * gen_xd_[g]);
        p[g] = (emf[g] * std::conj(current)).real();
    }
    return p;
}

std::vector<double> DynamicNetwork::reference_angles() const
{
    std::vector<double> out;
    for (const auto& [bus, v] : ideal_sources_) {
        if (std::abs(v) > 0.0) {
            out.push_back(std::arg(v));
        }
    }
    return out;
}

// ---- integration ----------------------------------------------------------

void initialize_machines(const NetworkModel& net, std::span<const Complex> voltages,
                         std::vector<GeneratorClassical>& gens)
{
    const auto buses = net.buses();
    for (auto& g : gens) {
        const auto idx = net.bus_index(g.bus);
        const Complex v = voltages[idx];
        if (!(std::abs(v) > 0.0)) {
            throw Error(ErrorKind::InvalidValue, "generator at bus \"" + g.bus + "\" has zero terminal voltage");
        }
        const Complex s_gen(buses[idx].gen_p, buses[idx].gen_q);
        const Complex current = std::conj(s_gen / v);
        const Complex e = v + kJ * g.xd_p * current;
        g.e_mag = std::abs(e);
        g.delta = std::arg(e);
        g.omega_dev = 0.0;
    }
}

DynState init_dynamics(const NetworkModel& net, const LoadflowResult& lf, std::vector<GeneratorClassical> gens)
{
    if (!lf.converged) {
        throw Error(ErrorKind::NotConverged, "dynamic initialization needs a converged loadflow");
    }
    const auto buses = net.buses();
    if (lf.v_mag.size() != buses.size() || lf.v_ang.size() != buses.size()) {
        throw Error(ErrorKind::InvalidValue, "loadflow result does not belong to network \"" + net.id() + "\"");
    }
    DynState state;
    state.omega_s = 2.0 * std::numbers::pi * net.frequency();
    state.voltages.resize(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) {
        state.voltages[i] = std::polar(lf.v_mag[i], lf.v_ang[i]);
    }
    initialize_machines(net, state.voltages, gens);
    state.network = std::make_shared<DynamicNetwork>(net, state.voltages, gens);
    const auto e = emfs(gens);
    state.p_elec = state.network->electrical_power(e, state.network->solve(e));
    for (std::size_t g = 0; g < gens.size(); ++g) {
        gens[g].p_mech = state.p_elec[g];
    }
    state.gens = std::move(gens);
    return state;
}

std::vector<double> advance_machines(std::vector<GeneratorClassical>& gens, std::span<const double> p_elec_start,
                                     double dt, double omega_s, const NetworkPowerSolve& solve)
{
    const auto n = gens.size();
    std::vector<double> accel0(n);
    std::vector<double> delta0(n);
    std::vector<double> omega0(n);
    for (std::size_t g = 0; g < n; ++g) {
        const auto& m = gens[g];
        delta0[g] = m.delta;
        omega0[g] = m.omega_dev;
        accel0[g] = (m.p_mech - p_elec_start[g] - m.d * m.omega_dev) / (2.0 * m.h);
    }

    // Explicit Euler predictor, then fixed-point corrections of the
    // trapezoidal rule (the damping term is solved exactly).
    std::vector<GeneratorClassical> trial = gens;
    for (std::size_t g = 0; g < n; ++g) {
        trial[g].omega_dev = omega0[g] + dt * accel0[g];
        trial[g].delta = delta0[g] + dt * omega_s * omega0[g];
    }
    std::vector<double> p_elec;
    for (int it = 0; it < kMaxStepIterations; ++it) {
        p_elec = solve(trial);
        double change = 0.0;
        for (std::size_t g = 0; g < n; ++g) {
            const auto& m = gens[g];
            const double k = dt / (4.0 * m.h);
            const double omega =
                (omega0[g] + dt / 2.0 * accel0[g] + k * (m.p_mech - p_elec[g])) / (1.0 + k * m.d);
            const double delta = delta0[g] + dt / 2.0 * omega_s * (omega0[g] + omega);
            change = std::max({change, std::abs(omega - trial[g].omega_dev), std::abs(delta - trial[g].delta)});
            trial[g].omega_dev = omega;
            trial[g].delta = delta;
        }
        if (change <= kStepTolerance) {
            gens = std::move(trial);
            return solve(gens);
        }
    }
    throw Error(ErrorKind::NotConverged, "trapezoidal step did not converge within " +
                                             std::to_string(kMaxStepIterations) + " iterations");
}

DynState integrate_step(const DynState& state, double dt)
{
    if (!(dt > 0.0)) {
        throw Error(ErrorKind::InvalidValue, "step size must be > 0");
    }
    DynState next = state;
    const auto& network = *state.network;
    std::vector<Complex> voltages;
    auto solve = [&](std::span<const GeneratorClassical> gens) {
        const auto e = emfs(gens);
        voltages = network.solve(e);
        return network.electrical_power(e, voltages);
    };
    next.p_elec = advance_machines(next.gens, state.p_elec, dt, state.omega_s, solve);
    next.voltages = std::move(voltages);
    next.time = state.time + dt;
    return next;
}

DynState apply_event(const DynState& state, const DynEvent& event)
{
    DynState next = state;
    next.network = std::make_shared<DynamicNetwork>(state.network->with_event(event));
    const auto e = emfs(next.gens);
    next.voltages = next.network->solve(e);
    next.p_elec = next.network->electrical_power(e, next.voltages);
    return next;
}

long snap_to_step(double time, double dt) { return std::lround(time / dt); }

void record_sample(Trajectory& traj, const DynState& state)
{
    const auto& net = state.network->model();
    if (traj.time.empty()) {
        for (const auto& g : state.gens) {
            traj.generators.push_back(g.bus);
        }
        for (const auto& b : net.buses()) {
            traj.buses.push_back(b.id);
        }
        traj.delta.resize(state.gens.size());
        traj.omega_dev.resize(state.gens.size());
        traj.v_mag.resize(net.buses().size());
    }
    traj.time.push_back(state.time);
    double lo = 0.0;
    double hi = 0.0;
    bool any = false;
    auto span_with = [&](double a) {
        lo = any ? std::min(lo, a) : a;
        hi = any ? std::max(hi, a) : a;
        any = true;
    };
    for (std::size_t g = 0; g < state.gens.size(); ++g) {
        traj.delta[g].push_back(state.gens[g].delta);
        traj.omega_dev[g].push_back(state.gens[g].omega_dev);
        span_with(state.gens[g].delta);
    }
    for (double a : state.network->reference_angles()) {
        span_with(a);
    }
    for (std::size_t i = 0; i < state.voltages.size(); ++i) {
        traj.v_mag[i].push_back(std::abs(state.voltages[i]));
    }
    if (traj.stable && hi - lo > std::numbers::pi) {
        traj.stable = false;
        traj.instability_time = state.time;
    }
}

Trajectory run_dynamics(const NetworkModel& net, const LoadflowResult& lf, std::vector<GeneratorClassical> gens,
                        std::span<const DynEvent> events, const DynConfig& cfg)
{
    cfg.validate();
    validate_events(events);
    for (const auto& ev : events) {
        if (ev.kind == DynEventKind::TripBranch) {
            net.branch_index(ev.target);
        } else {
            net.bus_index(ev.target);
        }
    }
    const long steps = std::lround(cfg.t_end / cfg.dt);
    auto state = init_dynamics(net, lf, std::move(gens));
    Trajectory traj;
    record_sample(traj, state);
    std::size_t next_event = 0;
    for (long k = 0; k < steps; ++k) {
        while (next_event < events.size() && snap_to_step(events[next_event].time, cfg.dt) <= k) {
            state = apply_event(state, events[next_event++]);
        }
        state = integrate_step(state, cfg.dt);
        state.time = static_cast<double>(k + 1) * cfg.dt;
        record_sample(traj, state);
    }
    return traj;
}

}  // namespace gridengine
