#include <catch_amalgamated.hpp>

#include <algorithm>
#include <future>
#include <numbers>
#include <random>

#include "gridengine/cosim.hpp"
#include "gridengine/loadflow.hpp"
#include "gridengine/mate.hpp"
#include "gridengine/ybus.hpp"
#include "support.hpp"

using namespace gridengine;
using support::error_kind;

namespace {

Complex bus_voltage(const NetworkModel& net, const std::string& id)
{
    const auto& b = net.bus(id);
    return std::polar(b.v_mag, b.v_ang);
}

/// Two-bus transmission (slack T1, boundary T2 with a small load) and one feeder.
NetworkModel two_bus_with_feeder(NetworkModel feeder)
{
    NetworkSpec spec;
    spec.id = "T";
    spec.layer = Layer::AcLoadflow;
    spec.buses = {support::bus("T1", BusKind::Slack), support::bus("T2")};
    spec.buses[1].load_p = 0.2;
    spec.buses[1].load_q = 0.05;
    spec.branches = {support::line("T1-T2", "T1", "T2", 0.01, 0.1)};
    auto net = build_network(spec);
    attach_child(net, "T2", std::move(feeder), "H");
    return net;
}

NetworkModel head_only_feeder(double p, double q)
{
    NetworkSpec spec;
    spec.id = "F";
    spec.layer = Layer::AcLoadflow;
    spec.buses = {support::bus("H", BusKind::Slack)};
    spec.buses[0].load_p = p;
    spec.buses[0].load_q = q;
    return build_network(spec);
}

}  // namespace

TEST_CASE("balanced_phases replicates at -120 and +120 degrees")
{
    const Complex v = std::polar(1.02, -0.1);
    const auto abc = balanced_phases(v);
    CHECK(abc[0] == v);
    CHECK(std::abs(abc[1] - std::polar(1.02, -0.1 - 2 * std::numbers::pi / 3)) < 1e-15);
    CHECK(std::abs(abc[2] - std::polar(1.02, -0.1 + 2 * std::numbers::pi / 3)) < 1e-15);
}

TEST_CASE("tnd_powerflow: zero-load feeders leave the transmission solution unchanged")
{
    auto standalone = support::load_cdf_fixture("ieee14.cdf");
    REQUIRE(solve_newton_raphson(standalone).converged);

    auto net = support::load_cdf_fixture("ieee14.cdf");
    attach_child(net, "9", support::radial_feeder("Z1", 3, 10.0, 0.0, 0.0, 0.0), "H");
    attach_child(net, "14", support::radial_feeder("Z2", 2, 10.0, 0.0, 0.0, 0.0), "H");
    const auto result = tnd_powerflow(net);
    CHECK(result.converged);
    CHECK(result.outer_iterations == 2);
    for (const auto& b : standalone.buses()) {
        CHECK(std::abs(bus_voltage(net, b.id) - bus_voltage(standalone, b.id)) < 1e-12);
    }
}

TEST_CASE("tnd_powerflow: two-bus transmission with a feeder matches the merged network")
{
    for (auto feeder : {head_only_feeder(0.5, 0.0), support::radial_feeder("F", 1, 100.0, 0.5, 0.0, 0.0)}) {
        const auto original = two_bus_with_feeder(feeder);
        auto split = original;
        const auto result = tnd_powerflow(split);
        REQUIRE(result.converged);
        auto merged = support::merge_children(original);
        REQUIRE(solve_newton_raphson(merged).converged);
        CHECK(std::abs(bus_voltage(split, "T2") - bus_voltage(merged, "T2")) <= 1e-6);
    }
}

TEST_CASE("tnd_powerflow: miniature T&D case matches the merged network everywhere")
{
    const auto original = support::tnd_miniature();
    auto split = original;
    CoSimConfig cfg;
    cfg.boundary_tolerance = 1e-10;
    const auto result = tnd_powerflow(split, cfg);
    REQUIRE(result.converged);
    CHECK(result.outer_iterations <= 10);
    auto merged = support::merge_children(original);
    REQUIRE(solve_newton_raphson(merged).converged);
    for (const auto& b : original.buses()) {
        CHECK(std::abs(bus_voltage(split, b.id) - bus_voltage(merged, b.id)) <= 1e-8);
    }
    for (const auto& link : split.children()) {
        for (const auto& b : link.child->buses()) {
            const auto id = b.id == link.child_boundary_bus ? link.parent_bus : link.child->id() + "/" + b.id;
            CHECK(std::abs(std::polar(b.v_mag, b.v_ang) - bus_voltage(merged, id)) <= 1e-8);
        }
    }
    // The transmission model keeps its own loads.
    CHECK(split.bus("9").load_p == original.bus("9").load_p);
}

TEST_CASE("tnd_powerflow: message contents follow the direction")
{
    auto net = support::tnd_miniature();
    const auto result = tnd_powerflow(net);
    REQUIRE_FALSE(result.trace.empty());
    for (const auto& m : result.trace) {
        if (m.direction == Direction::Upstream) {
            CHECK(m.i_neg == Complex{});
            CHECK(m.i_zero == Complex{});
            CHECK(m.v_abc == std::array<Complex, 3>{});
            CHECK(m.equivalent_load != Complex{});
        } else {
            CHECK(m.equivalent_load == Complex{});
            CHECK(std::abs(m.v_abc[1] - m.v_abc[0] * std::polar(1.0, -2 * std::numbers::pi / 3)) < 1e-15);
        }
    }
    // Every round has one Downstream and one Upstream message per feeder.
    CHECK(result.trace.size() == static_cast<std::size_t>(result.outer_iterations) * 2 * net.children().size());
}

TEST_CASE("tnd_powerflow: fixed point and conservation at convergence")
{
    auto net = support::tnd_miniature();
    CoSimConfig cfg;
    cfg.boundary_tolerance = 1e-11;
    const auto result = tnd_powerflow(net, cfg);
    REQUIRE(result.converged);

    const std::size_t feeders = net.children().size();
    const auto& trace = result.trace;
    const auto last = trace.size() - 2 * feeders;
    const auto previous = last - 2 * feeders;
    for (std::size_t k = 0; k < feeders; ++k) {
        const auto& down_now = trace[last + 2 * k];
        const auto& down_before = trace[previous + 2 * k];
        const auto& up_now = trace[last + 2 * k + 1];
        const auto& up_before = trace[previous + 2 * k + 1];
        REQUIRE(down_now.direction == Direction::Downstream);
        REQUIRE(up_now.direction == Direction::Upstream);
        // One more iteration changes the boundary voltage by at most the tolerance.
        CHECK(std::abs(down_now.v_abc[0] - down_before.v_abc[0]) <= cfg.boundary_tolerance);
        // Power leaving the transmission bus (the equivalent it was solved
        // with) equals the power the feeder reports at its head.
        CHECK(std::abs(up_now.equivalent_load - up_before.equivalent_load) <= 1e-8);

        // Feeder side: head-bus power from the feeder's own branch flows.
        const auto& child = *net.children()[k].child;
        Complex head;
        const auto& h = child.bus("H");
        const auto flows = branch_flows(child);
        for (std::size_t b = 0; b < child.branches().size(); ++b) {
            if (child.branches()[b].from_bus == "H") {
                head += flows[b].s_from;
            } else if (child.branches()[b].to_bus == "H") {
                head += flows[b].s_to;
            }
        }
        head += Complex(h.load_p, h.load_q);
        head *= child.base_mva() / net.base_mva();
        CHECK(std::abs(head - up_now.equivalent_load) <= 1e-8);
    }
}

TEST_CASE("tnd_powerflow: failures")
{
    SECTION("feeder that cannot be solved is named")
    {
        auto net = two_bus_with_feeder(support::radial_feeder("heavy", 2, 10.0, 50.0, 10.0));
        const auto message = support::error_message([&] { tnd_powerflow(net); });
        CHECK_THAT(message, Catch::Matchers::ContainsSubstring("heavy"));
        CHECK(error_kind([&] { tnd_powerflow(net); }) == ErrorKind::NotConverged);
    }
    SECTION("outer iteration cap is reported, not thrown")
    {
        auto net = support::tnd_miniature();
        CoSimConfig cfg;
        cfg.max_outer_iterations = 1;
        const auto result = tnd_powerflow(net, cfg);
        CHECK_FALSE(result.converged);
        CHECK(result.outer_iterations == 1);
    }
    SECTION("invalid configuration")
    {
        auto net = support::tnd_miniature();
        CoSimConfig cfg;
        cfg.boundary_tolerance = 0.0;
        CHECK(error_kind([&] { tnd_powerflow(net, cfg); }) == ErrorKind::InvalidValue);
    }
}

TEST_CASE("mate_link_solve: Ohm's law, identity and errors")
{
    const std::vector<TheveninEquivalent> eq = {{"T", "b", Complex(1.0, 0.0), Complex(0.0, 0.05)},
                                                {"D", "h", Complex(0.9, 0.0), Complex(0.0, 0.05)}};
    const auto sol = mate_link_solve(eq, Complex(0.0, 0.1));
    CHECK(std::abs(sol.i_link - Complex(0.0, -0.5)) < 1e-15);
    CHECK(std::abs(sol.v_first - Complex(0.975, 0.0)) < 1e-15);
    CHECK(std::abs(sol.v_second - Complex(0.925, 0.0)) < 1e-15);

    auto same = eq;
    same[1].e_open = same[0].e_open;
    const auto idle = mate_link_solve(same, Complex(0.0, 0.1));
    CHECK(idle.i_link == Complex{});
    CHECK(idle.v_first == same[0].e_open);
    CHECK(idle.v_second == same[1].e_open);

    auto cancel = eq;
    cancel[1].z_th = Complex(0.0, -0.05);
    CHECK(error_kind([&] { mate_link_solve(cancel, {}); }) == ErrorKind::Singular);
    CHECK(error_kind([&] { mate_link_solve(std::span(eq).first(1), {}); }) == ErrorKind::InvalidValue);
    auto zero = eq;
    zero[0].z_th = {};
    CHECK(error_kind([&] { mate_link_solve(zero, Complex(0, 0.1)); }) == ErrorKind::InvalidValue);
}

TEST_CASE("mate_link_solve: two 3-bus subsystems match the combined admittance solve")
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int c = 0; c < 50; ++c) {
        std::vector<support::CMatrix> y(2);
        std::vector<std::vector<Complex>> inj(2);
        std::vector<TheveninEquivalent> eq;
        for (int s = 0; s < 2; ++s) {
            y[s] = support::dense_ybus(support::random_network(rng, 3, true));
            for (int i = 0; i < 3; ++i) {
                y[s][i][i] += Complex(0.5, -2.0);
                inj[s].push_back(Complex(u(rng), u(rng) - 0.5));
            }
            eq.push_back(thevenin_from_admittance(sparse_from_dense(y[s]), inj[s], 2));
        }
        const Complex z_link(0.01, 0.05);
        const auto sol = mate_link_solve(eq, z_link);

        support::CMatrix big(6, std::vector<Complex>(6));
        std::vector<Complex> rhs(6);
        for (int s = 0; s < 2; ++s) {
            for (int i = 0; i < 3; ++i) {
                rhs[3 * s + i] = inj[s][i];
                for (int j = 0; j < 3; ++j) {
                    big[3 * s + i][3 * s + j] = y[s][i][j];
                }
            }
        }
        const Complex yl = 1.0 / z_link;
        big[2][2] += yl;
        big[5][5] += yl;
        big[2][5] -= yl;
        big[5][2] -= yl;
        const auto inv = support::dense_inverse(big);
        Complex v2;
        Complex v5;
        for (int j = 0; j < 6; ++j) {
            v2 += inv[2][j] * rhs[j];
            v5 += inv[5][j] * rhs[j];
        }
        REQUIRE(std::abs(v2 - sol.v_first) <= 1e-10);
        REQUIRE(std::abs(v5 - sol.v_second) <= 1e-10);
    }
}

TEST_CASE("mate_star_solve: hub with two leaves matches the combined solve")
{
    // Hub: 3 buses, ports at buses 0 and 2. Leaves: one bus each.
    const support::CMatrix hub = {{Complex(1, -12), Complex(0, 10), 0},
                                  {Complex(0, 10), Complex(0.5, -20), Complex(0, 10)},
                                  {0, Complex(0, 10), Complex(0.3, -10.5)}};
    const std::vector<Complex> hub_inj = {Complex(1.0, 0.2), 0, Complex(0.1, 0.0)};
    const auto hub_inv = support::dense_inverse(hub);
    MultiPortEquivalent eq;
    const int ports[2] = {0, 2};
    eq.z = Eigen::MatrixXcd(2, 2);
    for (int a = 0; a < 2; ++a) {
        Complex e;
        for (int j = 0; j < 3; ++j) {
            e += hub_inv[ports[a]][j] * hub_inj[j];
        }
        eq.e_open.push_back(e);
        for (int b = 0; b < 2; ++b) {
            eq.z(a, b) = hub_inv[ports[a]][ports[b]];
        }
    }
    const std::vector<TheveninEquivalent> leaves = {{"L1", "x", Complex(0.2, 0.0), 1.0 / Complex(0.8, -0.3)},
                                                    {"L2", "y", Complex(0.1, 0.05), 1.0 / Complex(1.2, -0.6)}};
    const std::vector<Complex> z_link = {Complex(0.0, 0.05), Complex(0.01, 0.02)};
    const auto currents = mate_star_solve(eq, leaves, z_link);

    // Combined: hub buses 0..2, leaf buses 3, 4 (Norton form of the leaves).
    support::CMatrix big(5, std::vector<Complex>(5));
    std::vector<Complex> rhs(5);
    for (int i = 0; i < 3; ++i) {
        rhs[i] = hub_inj[i];
        for (int j = 0; j < 3; ++j) {
            big[i][j] = hub[i][j];
        }
    }
    for (int k = 0; k < 2; ++k) {
        const int leaf = 3 + k;
        big[leaf][leaf] += 1.0 / leaves[k].z_th;
        rhs[leaf] = leaves[k].e_open / leaves[k].z_th;
        const Complex yl = 1.0 / z_link[k];
        big[ports[k]][ports[k]] += yl;
        big[leaf][leaf] += yl;
        big[ports[k]][leaf] -= yl;
        big[leaf][ports[k]] -= yl;
    }
    const auto inv = support::dense_inverse(big);
    std::vector<Complex> v(5);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            v[i] += inv[i][j] * rhs[j];
        }
    }
    for (int k = 0; k < 2; ++k) {
        const Complex expected = (v[ports[k]] - v[3 + k]) / z_link[k];
        CHECK(std::abs(currents[k] - expected) <= 1e-10);
    }
}

TEST_CASE("thevenin_from_admittance: unit injection gives the driving-point impedance")
{
    const auto y = sparse_from_dense<Complex>({{Complex(0, -20), Complex(0, 10)}, {Complex(0, 10), Complex(1, -10)}});
    const std::vector<Complex> inj = {Complex(0, 0), Complex(0, 0)};
    const auto eq = thevenin_from_admittance(y, inj, 0, "s");
    const auto inv = support::dense_inverse({{Complex(0, -20), Complex(0, 10)}, {Complex(0, 10), Complex(1, -10)}});
    CHECK(std::abs(eq.z_th - inv[0][0]) < 1e-12);
    CHECK(eq.e_open == Complex{});
    CHECK(eq.subsystem == "s");
}

TEST_CASE("LocalFeeder: head voltage, system base conversion and balanced currents")
{
    auto feeder = support::radial_feeder("F", 2, 10.0, 0.5, 0.1);
    LocalFeeder local(feeder, "H", 100.0);
    BoundaryExchange down;
    down.direction = Direction::Downstream;
    down.boundary_bus = "9";
    down.round = 3;
    down.v_abc = balanced_phases(std::polar(1.01, -0.2));
    const auto up = local.exchange(down);
    CHECK(up.direction == Direction::Upstream);
    CHECK(up.boundary_bus == "9");
    CHECK(up.round == 3);
    CHECK(up.i_neg == Complex{});
    CHECK(up.i_zero == Complex{});
    // Loads of 2 x (0.5 + j0.1) on a 10 MVA base plus losses, in 100 MVA pu.
    CHECK(up.equivalent_load.real() > 0.1);
    CHECK(up.equivalent_load.real() < 0.11);
    CHECK(local.solved().bus("H").v_mag == Catch::Approx(1.01));
    CHECK(local.solved().bus("H").v_ang == Catch::Approx(-0.2));
    CHECK(local.model() == feeder);

    CHECK(error_kind([&] { LocalFeeder(feeder, "nope", 100.0); }) == ErrorKind::UnknownBus);
    CHECK(error_kind([&] { LocalFeeder(feeder, "H", 0.0); }) == ErrorKind::InvalidValue);
}

namespace {

std::vector<GeneratorClassical> transmission_machines()
{
    std::vector<GeneratorClassical> gens;
    for (const char* bus : {"1", "2", "3", "6", "8"}) {
        GeneratorClassical g;
        g.bus = bus;
        g.h = 5.0;
        g.d = 1.0;
        g.xd_p = 0.25;
        gens.push_back(g);
    }
    return gens;
}

/// Split run on the miniature case next to the same run on the merged network.
std::pair<Trajectory, Trajectory> split_and_merged(const std::vector<DynEvent>& events, double t_end)
{
    const auto original = support::tnd_miniature();
    auto split = original;
    CoSimConfig cfg;
    cfg.boundary_tolerance = 1e-12;
    REQUIRE(tnd_powerflow(split, cfg).converged);
    auto merged = support::merge_children(original);
    const auto lf = solve_newton_raphson(merged);
    REQUIRE(lf.converged);
    const DynConfig dyn{0.005, t_end};
    return {tnd_dynamic_sim(split, transmission_machines(), events, dyn),
            run_dynamics(merged, lf, transmission_machines(), events, dyn)};
}

void check_same(const Trajectory& a, const Trajectory& b, double tolerance)
{
    REQUIRE(a.time.size() == b.time.size());
    REQUIRE(a.generators == b.generators);
    for (std::size_t g = 0; g < a.generators.size(); ++g) {
        for (std::size_t k = 0; k < a.time.size(); ++k) {
            REQUIRE(std::abs(a.delta[g][k] - b.delta[g][k]) <= tolerance);
        }
    }
    for (std::size_t i = 0; i < b.buses.size(); ++i) {
        const auto it = std::find(a.buses.begin(), a.buses.end(), b.buses[i]);
        REQUIRE(it != a.buses.end());
        const auto j = static_cast<std::size_t>(it - a.buses.begin());
        for (std::size_t k = 0; k < a.time.size(); ++k) {
            REQUIRE(std::abs(a.v_mag[j][k] - b.v_mag[i][k]) <= tolerance);
        }
    }
}

}  // namespace

TEST_CASE("tnd_dynamic_sim: no events stays at the initial operating point")
{
    auto net = support::tnd_miniature();
    REQUIRE(tnd_powerflow(net).converged);
    const auto traj = tnd_dynamic_sim(net, transmission_machines(), {}, {0.005, 1.0});
    CHECK(traj.stable);
    for (std::size_t g = 0; g < traj.generators.size(); ++g) {
        for (std::size_t k = 0; k < traj.time.size(); ++k) {
            REQUIRE(std::abs(traj.delta[g][k] - traj.delta[g][0]) <= 1e-10);
        }
    }
    // Child buses are reported with their network prefix.
    CHECK(std::find(traj.buses.begin(), traj.buses.end(), "F9/N3") != traj.buses.end());
}

TEST_CASE("tnd_dynamic_sim: split simulation matches the merged network")
{
    const std::vector<DynEvent> transmission_fault = {{0.1, DynEventKind::ApplyBusFault, "4", Complex(0.0, 0.02)},
                                                      {0.2, DynEventKind::ClearBusFault, "4", Complex(0.0, 0.02)}};
    const auto [split, merged] = split_and_merged(transmission_fault, 1.0);
    check_same(split, merged, 1e-8);
}

TEST_CASE("tnd_dynamic_sim: prefixed targets reach into a child network")
{
    const std::vector<DynEvent> feeder_fault = {{0.1, DynEventKind::ApplyBusFault, "F9/N2", Complex(0.0, 0.01)},
                                                {0.15, DynEventKind::ClearBusFault, "F9/N2", Complex(0.0, 0.01)}};
    const auto [split, merged] = split_and_merged(feeder_fault, 0.5);
    check_same(split, merged, 1e-8);
    // The fault is visible on the feeder.
    const auto it = std::find(split.buses.begin(), split.buses.end(), "F9/N2");
    REQUIRE(it != split.buses.end());
    const auto& v = split.v_mag[static_cast<std::size_t>(it - split.buses.begin())];
    CHECK(v[25] < 0.5 * v[0]);

    const std::vector<DynEvent> trip = {{0.1, DynEventKind::TripBranch, "F14/N1-N2", {}}};
    const auto [split_trip, merged_trip] = split_and_merged(trip, 0.3);
    check_same(split_trip, merged_trip, 1e-8);
}

TEST_CASE("tnd_dynamic_sim: unknown targets")
{
    auto net = support::tnd_miniature();
    REQUIRE(tnd_powerflow(net).converged);
    auto kind = [&](DynEvent ev) {
        return error_kind([&] { tnd_dynamic_sim(net, transmission_machines(), std::vector{ev}, {0.005, 0.1}); });
    };
    CHECK(kind({0.05, DynEventKind::ApplyBusFault, "F9/N99", {}}) == ErrorKind::UnknownBus);
    CHECK(kind({0.05, DynEventKind::ApplyBusFault, "nowhere", {}}) == ErrorKind::UnknownBus);
    CHECK(kind({0.05, DynEventKind::TripBranch, "F9/nope", {}}) == ErrorKind::UnknownBranch);
}
