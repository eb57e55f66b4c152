#include "gridengine/cosim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "gridengine/mate.hpp"

namespace gridengine {

namespace {

std::string time_label(double t)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", t);
    return buf;
}

std::vector<Complex> bus_voltages(const NetworkModel& net)
{
    std::vector<Complex> v;
    v.reserve(net.buses().size());
    for (const auto& b : net.buses()) {
        v.push_back(b.in_service ? std::polar(b.v_mag, b.v_ang) : Complex{});
    }
    return v;
}

std::vector<Complex> emfs(std::span<const GeneratorClassical> gens)
{
    std::vector<Complex> e(gens.size());
    for (std::size_t g = 0; g < gens.size(); ++g) {
        e[g] = std::polar(gens[g].e_mag, gens[g].delta);
    }
    return e;
}

}  // namespace

const char* to_string(Direction direction) noexcept
{
    return direction == Direction::Downstream ? "Downstream" : "Upstream";
}

std::array<Complex, 3> balanced_phases(Complex v_positive)
{
    const double shift = 2.0 * std::numbers::pi / 3.0;
    return {v_positive, v_positive * std::polar(1.0, -shift), v_positive * std::polar(1.0, shift)};
}

void CoSimConfig::validate() const
{
    if (max_outer_iterations < 1) {
        throw Error(ErrorKind::InvalidValue, "max_outer_iterations must be >= 1");
    }
    if (!(boundary_tolerance > 0.0)) {
        throw Error(ErrorKind::InvalidValue, "boundary_tolerance must be > 0");
    }
    loadflow.validate();
}

// ---- LocalFeeder -----------------------------------------------------------

LocalFeeder::LocalFeeder(NetworkModel feeder, std::string head_bus, double system_base_mva, LoadflowConfig cfg)
    : original_(std::move(feeder)), head_(std::move(head_bus)), system_base_(system_base_mva), cfg_(cfg)
{
    original_.bus_index(head_);
    if (!(system_base_ > 0.0)) {
        throw Error(ErrorKind::InvalidValue, "system MVA base must be > 0");
    }
    cfg_.validate();
    solved_ = original_;
}

BoundaryExchange LocalFeeder::exchange(const BoundaryExchange& downstream)
{
    if (downstream.direction != Direction::Downstream) {
        throw Error(ErrorKind::Protocol, "feeder \"" + original_.id() + "\" expected a Downstream message");
    }
    NetworkModel work = original_;
    const auto head = work.bus_index(head_);
    const Bus& before = original_.buses()[head];
    Bus& bus = work.bus_at(head);
    bus.kind = BusKind::Slack;
    bus.v_mag = std::abs(downstream.v_abc[0]);
    bus.v_ang = std::arg(downstream.v_abc[0]);

    last_ = solve_newton_raphson(work, cfg_);
    if (!last_.converged) {
        throw Error(ErrorKind::NotConverged, "loadflow of feeder \"" + original_.id() + "\" did not converge in round " +
                                                 std::to_string(downstream.round));
    }
    const Bus& after = work.buses()[head];
    const Complex drawn = Complex(after.gen_p - before.gen_p, after.gen_q - before.gen_q);

    solved_ = work;
    Bus& kept = solved_.bus_at(head);
    kept.kind = before.kind;
    kept.gen_p = before.gen_p;
    kept.gen_q = before.gen_q;

    BoundaryExchange up;
    up.direction = Direction::Upstream;
    up.boundary_bus = downstream.boundary_bus;
    up.equivalent_load = drawn * (original_.base_mva() / system_base_);
    up.i_neg = Complex{};
    up.i_zero = Complex{};
    up.round = downstream.round;
    return up;
}

// ---- power flow ------------------------------------------------------------

TndPowerflowResult run_tnd_powerflow(NetworkModel& transmission, std::span<const FeederLink> links,
                                     const CoSimConfig& cfg)
{
    cfg.validate();
    std::vector<std::size_t> parent(links.size());
    for (std::size_t k = 0; k < links.size(); ++k) {
        parent[k] = transmission.bus_index(links[k].parent_bus);
        if (links[k].endpoint == nullptr) {
            throw Error(ErrorKind::InvalidValue, "feeder link at \"" + links[k].parent_bus + "\" has no endpoint");
        }
    }

    NetworkModel work = transmission;
    std::vector<Complex> base_load(transmission.buses().size());
    for (std::size_t i = 0; i < base_load.size(); ++i) {
        base_load[i] = Complex(transmission.buses()[i].load_p, transmission.buses()[i].load_q);
    }
    std::vector<Complex> equivalent(links.size());
    std::vector<Complex> previous(links.size());

    TndPowerflowResult result;
    for (int round = 1; round <= cfg.max_outer_iterations; ++round) {
        std::vector<Complex> load = base_load;
        for (std::size_t k = 0; k < links.size(); ++k) {
            load[parent[k]] += equivalent[k];
        }
        for (std::size_t i : parent) {
            work.bus_at(i).load_p = load[i].real();
            work.bus_at(i).load_q = load[i].imag();
        }

        LoadflowConfig lf_cfg = cfg.loadflow;
        if (round > 1) {
            lf_cfg.flat_start = false;
        }
        auto lf = solve_newton_raphson(work, lf_cfg);
        if (!lf.converged) {
            for (auto& link : links) {
                link.endpoint->finish(false, round);
            }
            throw Error(ErrorKind::NotConverged, "loadflow of transmission network \"" + transmission.id() +
                                                     "\" did not converge in round " + std::to_string(round));
        }

        double change = std::numeric_limits<double>::infinity();
        std::vector<Complex> voltage(links.size());
        for (std::size_t k = 0; k < links.size(); ++k) {
            const auto& b = work.buses()[parent[k]];
            voltage[k] = std::polar(b.v_mag, b.v_ang);
        }
        if (round > 1) {
            change = 0.0;
            for (std::size_t k = 0; k < links.size(); ++k) {
                change = std::max(change, std::abs(voltage[k] - previous[k]));
            }
        }

        for (std::size_t k = 0; k < links.size(); ++k) {
            BoundaryExchange down;
            down.direction = Direction::Downstream;
            down.boundary_bus = links[k].parent_bus;
            down.v_abc = balanced_phases(voltage[k]);
            down.round = round;
            result.trace.push_back(down);
            auto up = links[k].endpoint->exchange(down);
            if (up.direction != Direction::Upstream || up.round != round || up.boundary_bus != down.boundary_bus) {
                throw Error(ErrorKind::Protocol, "feeder at \"" + links[k].parent_bus +
                                                     "\" answered with a mismatched boundary message");
            }
            if (!detail::is_finite(up.equivalent_load)) {
                throw Error(ErrorKind::InvalidValue,
                            "feeder at \"" + links[k].parent_bus + "\" reported a non-finite equivalent load");
            }
            equivalent[k] = up.equivalent_load;
            result.trace.push_back(std::move(up));
        }

        previous = voltage;
        result.transmission = std::move(lf);
        result.outer_iterations = round;
        result.max_boundary_change = change;
        if (round > 1 && change <= cfg.boundary_tolerance) {
            result.converged = true;
            break;
        }
    }
    for (auto& link : links) {
        link.endpoint->finish(result.converged, result.outer_iterations);
    }

    for (std::size_t i = 0; i < transmission.buses().size(); ++i) {
        const auto& solved = work.buses()[i];
        Bus& bus = transmission.bus_at(i);
        bus.v_mag = solved.v_mag;
        bus.v_ang = solved.v_ang;
        bus.gen_p = solved.gen_p;
        bus.gen_q = solved.gen_q;
    }
    return result;
}

TndPowerflowResult tnd_powerflow(NetworkModel& transmission, const CoSimConfig& cfg)
{
    std::vector<LocalFeeder> feeders;
    feeders.reserve(transmission.children().size());
    for (const auto& link : transmission.children()) {
        feeders.emplace_back(*link.child, link.child_boundary_bus, transmission.base_mva(), cfg.loadflow);
    }
    std::vector<FeederLink> links;
    for (std::size_t k = 0; k < feeders.size(); ++k) {
        links.push_back({transmission.children()[k].parent_bus, &feeders[k]});
    }
    auto result = run_tnd_powerflow(transmission, links, cfg);
    for (std::size_t k = 0; k < feeders.size(); ++k) {
        result.feeders.push_back(feeders[k].last_result());
        NetworkModel& child = transmission.child_at(k);
        const auto& solved = feeders[k].solved();
        for (std::size_t i = 0; i < child.buses().size(); ++i) {
            Bus& bus = child.bus_at(i);
            bus.v_mag = solved.buses()[i].v_mag;
            bus.v_ang = solved.buses()[i].v_ang;
            bus.gen_p = solved.buses()[i].gen_p;
            bus.gen_q = solved.buses()[i].gen_q;
        }
    }
    return result;
}

// ---- split dynamics --------------------------------------------------------

namespace {

struct Subsystem {
    std::string id;
    std::string prefix;
    std::shared_ptr<const DynamicNetwork> network;
    std::size_t first_gen = 0;
    std::size_t gen_count = 0;
    double scale = 1.0;  // system-base current / subsystem-base current
    std::vector<Complex> voltages;
};

class SplitSystem {
public:
    SplitSystem(const NetworkModel& transmission, std::vector<GeneratorClassical>& gens)
    {
        std::vector<std::string> ports;
        for (const auto& link : transmission.children()) {
            if (!link.child->children().empty()) {
                throw Error(ErrorKind::UnsupportedFeature,
                            "nested child networks below \"" + link.child->id() + "\" are not supported in dynamics");
            }
            ports.push_back(link.parent_bus);
        }
        const auto base_gens = gens.size();
        auto t_voltages = bus_voltages(transmission);
        std::vector<GeneratorClassical> t_gens(gens.begin(), gens.end());
        initialize_machines(transmission, t_voltages, t_gens);
        subsystems_.push_back({transmission.id(), "",
                               std::make_shared<DynamicNetwork>(transmission, t_voltages, t_gens, ports), 0,
                               base_gens, 1.0, t_voltages});
        gens = std::move(t_gens);

        for (const auto& link : transmission.children()) {
            const auto& child = *link.child;
            auto voltages = bus_voltages(child);
            auto child_gens = generators_from_model(child);
            initialize_machines(child, voltages, child_gens);
            Subsystem s;
            s.id = child.id();
            s.prefix = child.id() + "/";
            s.network = std::make_shared<DynamicNetwork>(child, voltages, child_gens,
                                                         std::vector<std::string>{link.child_boundary_bus});
            s.first_gen = gens.size();
            s.gen_count = child_gens.size();
            s.scale = transmission.base_mva() / child.base_mva();
            s.voltages = voltages;
            subsystems_.push_back(std::move(s));
            for (auto& g : child_gens) {
                gens.push_back(std::move(g));
            }
        }
    }

    /// Coupled network solution; returns p_elec for every generator and
    /// updates the stored voltages.
    std::vector<double> solve(std::span<const GeneratorClassical> gens, double time)
    {
        const auto leaves = subsystems_.size() - 1;
        std::vector<std::vector<Complex>> e(subsystems_.size());
        for (std::size_t s = 0; s < subsystems_.size(); ++s) {
            e[s] = emfs(gens.subspan(subsystems_[s].first_gen, subsystems_[s].gen_count));
        }
        MultiPortEquivalent hub;
        std::vector<TheveninEquivalent> leaf(leaves);
        guarded(0, time, [&] {
            hub.e_open = subsystems_[0].network->open_circuit_port_voltages(e[0]);
            hub.z = subsystems_[0].network->port_impedance();
        });
        for (std::size_t k = 0; k < leaves; ++k) {
            const auto& s = subsystems_[k + 1];
            guarded(k + 1, time, [&] {
                leaf[k].subsystem = s.id;
                leaf[k].boundary_bus = s.network->ports().front();
                leaf[k].e_open = s.network->open_circuit_port_voltages(e[k + 1]).front();
                leaf[k].z_th = s.network->port_impedance()(0, 0) * s.scale;
            });
        }
        const std::vector<Complex> z_link(leaves, Complex{});
        std::vector<Complex> current;
        guarded(0, time, [&] { current = mate_star_solve(hub, leaf, z_link); });

        std::vector<double> p_elec(gens.size());
        for (std::size_t s = 0; s < subsystems_.size(); ++s) {
            auto& sub = subsystems_[s];
            std::vector<Complex> injection;
            if (s == 0) {
                injection.resize(leaves);
                for (std::size_t k = 0; k < leaves; ++k) {
                    injection[k] = -current[k];
                }
            } else {
                injection = {current[s - 1] * sub.scale};
            }
            guarded(s, time, [&] {
                sub.voltages = sub.network->solve(e[s], injection);
                const auto p = sub.network->electrical_power(e[s], sub.voltages);
                std::copy(p.begin(), p.end(), p_elec.begin() + static_cast<std::ptrdiff_t>(sub.first_gen));
            });
        }
        return p_elec;
    }

    void apply(const DynEvent& event, double time)
    {
        // A "<child id>/<element>" target names one child explicitly; a plain
        // id goes to the first subsystem that has it.
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t s = 0; s < subsystems_.size(); ++s) {
                const auto& sub = subsystems_[s];
                DynEvent local = event;
                local.z_fault = event.z_fault / sub.scale;  // system base -> subsystem base
                if (pass == 0) {
                    if (sub.prefix.empty() || !event.target.starts_with(sub.prefix)) {
                        continue;
                    }
                    local.target = event.target.substr(sub.prefix.size());
                }
                const auto& model = sub.network->model();
                const bool found = local.kind == DynEventKind::TripBranch ? model.find_branch(local.target).has_value()
                                                                          : model.find_bus(local.target).has_value();
                if (found) {
                    guarded(s, time, [&] {
                        subsystems_[s].network =
                            std::make_shared<DynamicNetwork>(subsystems_[s].network->with_event(local));
                    });
                    return;
                }
            }
        }
        if (event.kind == DynEventKind::TripBranch) {
            throw Error(ErrorKind::UnknownBranch, "event targets unknown branch \"" + event.target + "\"");
        }
        throw Error(ErrorKind::UnknownBus, "event targets unknown bus \"" + event.target + "\"");
    }

    void record(Trajectory& traj, std::span<const GeneratorClassical> gens, double time) const
    {
        if (traj.time.empty()) {
            for (const auto& s : subsystems_) {
                for (std::size_t g = 0; g < s.gen_count; ++g) {
                    traj.generators.push_back(s.prefix + gens[s.first_gen + g].bus);
                }
                for (const auto& b : s.network->model().buses()) {
                    traj.buses.push_back(s.prefix + b.id);
                }
            }
            traj.delta.resize(gens.size());
            traj.omega_dev.resize(gens.size());
            traj.v_mag.resize(traj.buses.size());
        }
        traj.time.push_back(time);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t g = 0; g < gens.size(); ++g) {
            traj.delta[g].push_back(gens[g].delta);
            traj.omega_dev[g].push_back(gens[g].omega_dev);
            lo = std::min(lo, gens[g].delta);
            hi = std::max(hi, gens[g].delta);
        }
        std::size_t row = 0;
        for (const auto& s : subsystems_) {
            for (double a : s.network->reference_angles()) {
                lo = std::min(lo, a);
                hi = std::max(hi, a);
            }
            for (const auto& v : s.voltages) {
                traj.v_mag[row++].push_back(std::abs(v));
            }
        }
        if (traj.stable && hi - lo > std::numbers::pi) {
            traj.stable = false;
            traj.instability_time = time;
        }
    }

private:
    template <class F>
    void guarded(std::size_t s, double time, F&& f) const
    {
        try {
            f();
        } catch (const Error& e) {
            throw Error(e.kind(), "subsystem \"" + subsystems_[s].id + "\" at t = " + time_label(time) + " s: " +
                                      e.what());
        }
    }

    std::vector<Subsystem> subsystems_;
};

}  // namespace

Trajectory tnd_dynamic_sim(const NetworkModel& transmission, std::vector<GeneratorClassical> gens,
                           std::span<const DynEvent> events, const DynConfig& cfg)
{
    cfg.validate();
    validate_events(events);
    SplitSystem system(transmission, gens);
    const double omega_s = 2.0 * std::numbers::pi * transmission.frequency();

    auto p_elec = system.solve(gens, 0.0);
    for (std::size_t g = 0; g < gens.size(); ++g) {
        gens[g].p_mech = p_elec[g];
    }
    Trajectory traj;
    system.record(traj, gens, 0.0);

    const long steps = std::lround(cfg.t_end / cfg.dt);
    std::size_t next_event = 0;
    for (long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        bool changed = false;
        while (next_event < events.size() && snap_to_step(events[next_event].time, cfg.dt) <= k) {
            system.apply(events[next_event++], t);
            changed = true;
        }
        if (changed) {
            p_elec = system.solve(gens, t);
        }
        const double t_next = static_cast<double>(k + 1) * cfg.dt;
        p_elec = advance_machines(gens, p_elec, cfg.dt, omega_s,
                                  [&](std::span<const GeneratorClassical> trial) { return system.solve(trial, t_next); });
        system.record(traj, gens, t_next);
    }
    return traj;
}

}  // namespace gridengine
