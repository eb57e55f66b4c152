#include "gridengine/topology.hpp"

#include <algorithm>
#include <numeric>

namespace gridengine {

namespace {

bool is_number(std::string_view s)
{
    return !s.empty() && s.size() < 19 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

struct DisjointSet {
    std::vector<std::size_t> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x)
    {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b)
    {
        a = find(a);
        b = find(b);
        if (a != b) {
            parent[std::max(a, b)] = std::min(a, b);
        }
    }
};

}  // namespace

bool id_less(std::string_view a, std::string_view b)
{
    const bool na = is_number(a);
    const bool nb = is_number(b);
    if (na && nb) {
        const auto va = std::stoull(std::string(a));
        const auto vb = std::stoull(std::string(b));
        if (va != vb) {
            return va < vb;
        }
        return a < b;
    }
    if (na != nb) {
        return na;
    }
    return a < b;
}

std::vector<int> island_of_buses(const NetworkModel& net)
{
    const auto buses = net.buses();
    DisjointSet dsu(buses.size());
    for (const auto& br : net.branches()) {
        if (!br.in_service) {
            continue;
        }
        const auto f = net.bus_index(br.from_bus);
        const auto t = net.bus_index(br.to_bus);
        if (buses[f].in_service && buses[t].in_service) {
            dsu.unite(f, t);
        }
    }

    // root -> smallest member id, then rank roots by that id.
    std::vector<std::size_t> roots;
    std::vector<std::size_t> best(buses.size(), buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (!buses[i].in_service) {
            continue;
        }
        const auto r = dsu.find(i);
        if (best[r] == buses.size()) {
            roots.push_back(r);
            best[r] = i;
        } else if (id_less(buses[i].id, buses[best[r]].id)) {
            best[r] = i;
        }
    }
    std::sort(roots.begin(), roots.end(),
              [&](std::size_t a, std::size_t b) { return id_less(buses[best[a]].id, buses[best[b]].id); });
    std::vector<int> rank(buses.size(), -1);
    for (std::size_t k = 0; k < roots.size(); ++k) {
        rank[roots[k]] = static_cast<int>(k);
    }
    std::vector<int> island(buses.size(), -1);
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].in_service) {
            island[i] = rank[dsu.find(i)];
        }
    }
    return island;
}

IslandPartition find_islands(const NetworkModel& net)
{
    const auto island = island_of_buses(net);
    const int count = island.empty() ? 0 : *std::max_element(island.begin(), island.end()) + 1;
    IslandPartition out;
    out.islands.resize(static_cast<std::size_t>(count));
    out.energized.assign(static_cast<std::size_t>(count), false);
    const auto buses = net.buses();
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (island[i] < 0) {
            continue;
        }
        out.islands[island[i]].push_back(buses[i].id);
        if (buses[i].kind == BusKind::Slack) {
            out.energized[island[i]] = true;
        }
    }
    return out;
}

}  // namespace gridengine
