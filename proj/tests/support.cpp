#include "support.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gridengine/cdf.hpp"
#include "gridengine/reports.hpp"

#ifndef GRIDENGINE_TEST_DATA_DIR
#error "GRIDENGINE_TEST_DATA_DIR must point at tests/data"
#endif

namespace support {

using namespace gridengine;

std::string data_path(const std::string& name) { return std::string(GRIDENGINE_TEST_DATA_DIR) + "/" + name; }

NetworkModel load_cdf_fixture(const std::string& name) { return parse_cdf(read_file(data_path(name))); }

Bus bus(std::string id, BusKind kind)
{
    Bus b;
    b.id = std::move(id);
    b.name = b.id;
    b.kind = kind;
    b.base_kv = 138.0;
    return b;
}

Branch line(std::string id, std::string from, std::string to, double r, double x, double b)
{
    Branch br;
    br.id = std::move(id);
    br.from_bus = std::move(from);
    br.to_bus = std::move(to);
    br.r = r;
    br.x = x;
    br.b_total = b;
    return br;
}

NetworkModel two_bus(double x, double p_load, double q_load)
{
    NetworkSpec spec;
    spec.id = "two-bus";
    spec.layer = Layer::AcLoadflow;
    spec.buses = {bus("1", BusKind::Slack), bus("2")};
    spec.buses[1].load_p = p_load;
    spec.buses[1].load_q = q_load;
    spec.branches = {line("1-2", "1", "2", 0.0, x)};
    return build_network(std::move(spec));
}

NetworkModel triangle(double x, double rating)
{
    NetworkSpec spec;
    spec.id = "triangle";
    spec.layer = Layer::AcLoadflow;
    spec.buses = {bus("1"), bus("2"), bus("3", BusKind::Slack)};
    spec.buses[0].gen_p = 1.0;
    spec.branches = {line("1-2", "1", "2", 0.0, x), line("1-3", "1", "3", 0.0, x), line("2-3", "2", "3", 0.0, x)};
    for (auto& br : spec.branches) {
        br.rating = rating;
    }
    return build_network(std::move(spec));
}

NetworkModel omib(double x_line, double xd_p, double h, double d, double p_gen)
{
    NetworkSpec spec;
    spec.id = "omib";
    spec.layer = Layer::Dynamics;
    spec.buses = {bus("1", BusKind::Slack), bus("2")};
    spec.buses[1].gen_p = p_gen;
    spec.buses[1].machine = MachineData{h, d, xd_p};
    spec.branches = {line("1-2", "1", "2", 0.0, x_line)};
    return build_network(std::move(spec));
}

NetworkModel random_network(std::mt19937_64& rng, int n, bool with_taps)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

    NetworkSpec spec;
    spec.id = "random";
    spec.layer = Layer::AcLoadflow;
    for (int i = 1; i <= n; ++i) {
        auto b = bus(std::to_string(i), i == 1 ? BusKind::Slack : (u(rng) < 0.3 ? BusKind::PV : BusKind::PQ));
        b.v_mag = uniform(0.97, 1.05);
        b.v_ang = i == 1 ? 0.0 : uniform(-0.2, 0.2);
        b.load_p = uniform(0.0, 0.3);
        b.load_q = uniform(-0.05, 0.15);
        if (b.kind == BusKind::PV) {
            b.gen_p = uniform(0.1, 0.5);
        }
        b.shunt_b = u(rng) < 0.3 ? uniform(0.0, 0.05) : 0.0;
        spec.buses.push_back(std::move(b));
    }
    int k = 0;
    auto add_branch = [&](int from, int to) {
        auto br = line("b" + std::to_string(++k), std::to_string(from), std::to_string(to), uniform(0.005, 0.05),
                       uniform(0.05, 0.3), uniform(0.0, 0.05));
        if (with_taps && u(rng) < 0.3) {
            br.kind = BranchKind::Transformer;
            br.tap = uniform(0.95, 1.05);
            br.phase_shift = uniform(-0.1, 0.1);
        }
        spec.branches.push_back(std::move(br));
    };
    for (int i = 2; i <= n; ++i) {
        add_branch(1 + static_cast<int>(u(rng) * (i - 1)), i);
    }
    for (int extra = 0; extra < n / 2; ++extra) {
        const int a = 1 + static_cast<int>(u(rng) * n);
        const int b = 1 + static_cast<int>(u(rng) * n);
        if (a != b) {
            add_branch(a, b);
        }
    }
    return build_network(std::move(spec));
}

NetworkModel radial_feeder(const std::string& id, int sections, double base_mva, double load_p, double load_q,
                           double charging)
{
    NetworkSpec spec;
    spec.id = id;
    spec.base_mva = base_mva;
    spec.layer = Layer::AcLoadflow;
    auto head = bus("H", BusKind::Slack);
    head.base_kv = 12.47;
    spec.buses.push_back(head);
    std::string previous = "H";
    for (int s = 1; s <= sections; ++s) {
        auto b = bus("N" + std::to_string(s));
        b.base_kv = 12.47;
        b.load_p = load_p;
        b.load_q = load_q;
        spec.buses.push_back(b);
        spec.branches.push_back(line(previous + "-" + b.id, previous, b.id, 0.01 * s, 0.025 * s, charging));
        previous = b.id;
    }
    return build_network(std::move(spec));
}

NetworkModel tnd_miniature()
{
    auto net = load_cdf_fixture("ieee14.cdf");
    attach_child(net, "9", radial_feeder("F9", 3, 10.0, 0.3, 0.1), "H");
    attach_child(net, "13", radial_feeder("F13", 4, 10.0, 0.2, 0.05), "H");
    attach_child(net, "14", radial_feeder("F14", 2, 5.0, 0.4, 0.15), "H");
    return net;
}

NetworkModel merge_children(const NetworkModel& net)
{
    NetworkSpec spec;
    spec.id = net.id() + "-merged";
    spec.base_mva = net.base_mva();
    spec.frequency = net.frequency();
    spec.layer = net.layer();
    spec.z_min = net.z_min();
    spec.buses.assign(net.buses().begin(), net.buses().end());
    spec.branches.assign(net.branches().begin(), net.branches().end());

    auto parent_bus = [&](const std::string& id) -> Bus& {
        for (auto& b : spec.buses) {
            if (b.id == id) {
                return b;
            }
        }
        throw std::logic_error("no parent bus " + id);
    };

    for (const auto& link : net.children()) {
        const auto& child = *link.child;
        const double power = child.base_mva() / net.base_mva();  // child pu power -> system pu
        auto name = [&](const std::string& id) {
            return id == link.child_boundary_bus ? link.parent_bus : child.id() + "/" + id;
        };
        for (const auto& b : child.buses()) {
            if (b.id == link.child_boundary_bus) {
                auto& p = parent_bus(link.parent_bus);
                p.load_p += b.load_p * power;
                p.load_q += b.load_q * power;
                p.shunt_g += b.shunt_g * power;
                p.shunt_b += b.shunt_b * power;
                continue;
            }
            Bus m = b;
            m.id = name(b.id);
            m.gen_p *= power;
            m.gen_q *= power;
            m.load_p *= power;
            m.load_q *= power;
            m.shunt_g *= power;
            m.shunt_b *= power;
            m.q_max *= power;
            m.q_min *= power;
            spec.buses.push_back(std::move(m));
        }
        for (const auto& br : child.branches()) {
            Branch m = br;
            m.id = child.id() + "/" + br.id;
            m.from_bus = name(br.from_bus);
            m.to_bus = name(br.to_bus);
            m.r /= power;
            m.x /= power;
            m.b_total *= power;
            m.rating *= power;
            spec.branches.push_back(std::move(m));
        }
    }
    return build_network(std::move(spec));
}

CMatrix dense_inverse(CMatrix a)
{
    const std::size_t n = a.size();
    CMatrix inv(n, std::vector<Complex>(n));
    for (std::size_t i = 0; i < n; ++i) {
        inv[i][i] = 1.0;
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) {
                pivot = r;
            }
        }
        if (std::abs(a[pivot][col]) < 1e-14) {
            throw std::runtime_error("dense_inverse: singular matrix");
        }
        std::swap(a[col], a[pivot]);
        std::swap(inv[col], inv[pivot]);
        const Complex scale = 1.0 / a[col][col];
        for (std::size_t j = 0; j < n; ++j) {
            a[col][j] *= scale;
            inv[col][j] *= scale;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || a[r][col] == Complex{}) {
                continue;
            }
            const Complex f = a[r][col];
            for (std::size_t j = 0; j < n; ++j) {
                a[r][j] -= f * a[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    return inv;
}

CMatrix dense_ybus(const NetworkModel& net)
{
    const std::size_t n = net.buses().size();
    CMatrix y(n, std::vector<Complex>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& b = net.buses()[i];
        y[i][i] += Complex(b.shunt_g, b.shunt_b);
    }
    const Complex j(0.0, 1.0);
    for (const auto& br : net.branches()) {
        if (!br.in_service) {
            continue;
        }
        const auto f = net.bus_index(br.from_bus);
        const auto t = net.bus_index(br.to_bus);
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex ratio = br.tap * std::exp(j * br.phase_shift);
        const Complex half_charging = j * (br.b_total / 2.0);
        y[f][f] += (ys + half_charging) / (br.tap * br.tap);
        y[t][t] += ys + half_charging;
        y[f][t] += -ys / std::conj(ratio);
        y[t][f] += -ys / ratio;
    }
    return y;
}

double phasor_diagram_delta(Complex v_terminal, Complex s_gen, double xd_p)
{
    const Complex current = std::conj(s_gen / v_terminal);
    const Complex e = v_terminal + Complex(0.0, xd_p) * current;
    return std::arg(e);
}

std::vector<OmibSample> integrate_omib_rk4(const OmibOracle& sys, double delta0, double omega0, double dt,
                                           double t_end)
{
    const long steps = std::lround(t_end / dt);
    const long fault_step = std::lround(sys.t_fault / dt);
    const long clear_step =
        std::isfinite(sys.t_clear) ? std::lround(sys.t_clear / dt) : std::numeric_limits<long>::max();
    std::vector<OmibSample> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    double delta = delta0;
    double omega = omega0;
    out.push_back({0.0, delta, omega});
    for (long k = 0; k < steps; ++k) {
        const double p_max = (k >= fault_step && k < clear_step) ? sys.p_max_fault : sys.p_max_pre;
        auto f = [&](double dl, double w) {
            return std::pair{sys.omega_s * w, (sys.p_mech - p_max * std::sin(dl) - sys.d * w) / (2.0 * sys.h)};
        };
        const auto [k1d, k1w] = f(delta, omega);
        const auto [k2d, k2w] = f(delta + 0.5 * dt * k1d, omega + 0.5 * dt * k1w);
        const auto [k3d, k3w] = f(delta + 0.5 * dt * k2d, omega + 0.5 * dt * k2w);
        const auto [k4d, k4w] = f(delta + dt * k3d, omega + dt * k3w);
        delta += dt / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        omega += dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        out.push_back({static_cast<double>(k + 1) * dt, delta, omega});
    }
    return out;
}

}  // namespace support
