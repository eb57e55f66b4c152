#include "gridengine/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "gridengine/contingency.hpp"

namespace gridengine {

namespace {

/// Uniform [lo, hi) from raw engine bits; std distributions are not
/// specified bit-exactly across standard libraries.
class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : engine_(seed) {}
    double operator()(double lo, double hi)
    {
        const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * unit;
    }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>((*this)(0.0, static_cast<double>(n))); }

private:
    std::mt19937_64 engine_;
};

}  // namespace

NetworkModel synthetic_grid(int buses, std::uint64_t seed)
{
    if (buses < 2) {
        throw Error(ErrorKind::InvalidValue, "synthetic grid needs at least 2 buses");
    }
    Uniform rng(seed);
    const auto n = static_cast<std::size_t>(buses);
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));

    NetworkSpec spec;
    spec.id = "synthetic-" + std::to_string(buses) + "-" + std::to_string(seed);
    spec.layer = Layer::AcLoadflow;
    double total_load = 0.0;
    std::vector<std::size_t> generators;
    for (std::size_t i = 0; i < n; ++i) {
        Bus b;
        b.id = std::to_string(i + 1);
        b.name = "Bus " + b.id;
        b.base_kv = 230.0;
        b.area = static_cast<int>(i / 500) + 1;
        if (i == 0) {
            b.kind = BusKind::Slack;
        } else if (rng(0.0, 1.0) < 0.1) {
            b.kind = BusKind::PV;
            b.v_mag = rng(1.0, 1.04);
            generators.push_back(i);
        }
        b.load_p = rng(0.0, 0.3);
        b.load_q = b.load_p * rng(0.1, 0.4);
        total_load += b.load_p;
        spec.buses.push_back(std::move(b));
    }
    // PV units cover roughly 80 % of the load; the slack makes up the rest.
    for (auto i : generators) {
        spec.buses[i].gen_p = 0.8 * total_load / static_cast<double>(generators.size()) * rng(0.5, 1.5);
    }

    std::set<std::pair<std::size_t, std::size_t>> used;
    auto add_branch = [&](std::size_t a, std::size_t b) {
        if (a == b || !used.insert({std::min(a, b), std::max(a, b)}).second) {
            return;
        }
        Branch br;
        br.id = "L" + std::to_string(spec.branches.size() + 1);
        br.from_bus = spec.buses[a].id;
        br.to_bus = spec.buses[b].id;
        br.x = rng(0.02, 0.2);
        br.r = br.x * rng(0.05, 0.2);
        br.b_total = rng(0.0, 0.05);
        spec.branches.push_back(std::move(br));
    };
    for (std::size_t i = 0; i < n; ++i) {
        if ((i + 1) % cols != 0 && i + 1 < n) {
            add_branch(i, i + 1);
        }
        if (i + cols < n) {
            add_branch(i, i + cols);
        }
    }
    const auto chords = n / 10;
    for (std::size_t k = 0; k < chords; ++k) {
        const auto a = rng.index(n);
        const auto span = 2 + rng.index(3 * cols);
        add_branch(a, std::min(n - 1, a + span));
    }

    auto net = build_network(std::move(spec));
    const auto base = dc_power_flow(net);
    for (std::size_t m = 0; m < net.branches().size(); ++m) {
        net.branch_at(m).rating = std::abs(base.flows[m]) * rng(1.1, 1.6) + 0.05;
    }
    return net;
}

}  // namespace gridengine
