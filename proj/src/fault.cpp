#include "gridengine/fault.hpp"

#include "gridengine/topology.hpp"
#include "gridengine/ybus.hpp"

namespace gridengine {

FaultResult bus_fault_current(const NetworkModel& net, std::string_view bus_id, Complex z_fault)
{
    const auto fault_index = net.bus_index(bus_id);
    const auto buses = net.buses();
    const auto island = island_of_buses(net);
    const auto partition = find_islands(net);
    const int fault_island = island[fault_index];
    if (fault_island < 0 || buses[fault_index].kind == BusKind::Isolated || !partition.energized[fault_island]) {
        throw Error(ErrorKind::IsolatedBus, "bus \"" + std::string(bus_id) + "\" is not in an energized island");
    }

    const auto ybus = build_ybus(net);
    const bool short_circuit_layer = net.layer() >= Layer::AcShortCircuit;

    // Thevenin network over the non-ideal buses of the faulted island.
    std::vector<int> reduced(buses.size(), -1);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (island[i] != fault_island) {
            continue;
        }
        const bool has_source = short_circuit_layer && buses[i].short_circuit && buses[i].short_circuit->x_source > 0;
        const bool ideal = buses[i].kind == BusKind::Slack && !has_source;
        if (!ideal) {
            reduced[i] = static_cast<int>(members.size());
            members.push_back(i);
        }
    }

    std::vector<Complex> v_pre(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) {
        v_pre[i] = std::polar(buses[i].v_mag, buses[i].v_ang);
    }

    FaultResult out;
    out.post_fault_voltages = v_pre;
    const int fi = reduced[fault_index];
    if (fi < 0) {
        out.z_thevenin = 0.0;
        if (std::abs(z_fault) < 1e-12) {
            throw Error(ErrorKind::Singular, "bolted fault at ideal source bus \"" + std::string(bus_id) + "\"");
        }
        out.current = v_pre[fault_index] / z_fault;
        return out;
    }

    const auto n = static_cast<int>(members.size());
    std::vector<Eigen::Triplet<Complex>> triplets;
    for (int k = 0; k < ybus.y.outerSize(); ++k) {
        for (ComplexSparse::InnerIterator it(ybus.y, k); it; ++it) {
            const int r = reduced[ybus.model_index[it.row()]];
            const int c = reduced[ybus.model_index[it.col()]];
            if (r >= 0 && c >= 0) {
                triplets.emplace_back(r, c, it.value());
            }
        }
    }
    for (int k = 0; k < n; ++k) {
        const auto& b = buses[members[k]];
        if (short_circuit_layer && b.short_circuit && b.short_circuit->x_source > 0) {
            triplets.emplace_back(k, k, 1.0 / Complex(0.0, b.short_circuit->x_source));
        }
    }
    ComplexSparse y(n, n);
    y.setFromTriplets(triplets.begin(), triplets.end());

    const auto fact = ComplexFactorization::factorize(y);
    DenseVector<Complex> unit = DenseVector<Complex>::Zero(n);
    unit[fi] = 1.0;
    const DenseVector<Complex> z_col = fact.solve(unit);

    out.z_thevenin = z_col[fi];
    const Complex total = out.z_thevenin + z_fault;
    if (std::abs(total) < 1e-12) {
        throw Error(ErrorKind::Singular, "zero total fault impedance at bus \"" + std::string(bus_id) + "\"");
    }
    out.current = v_pre[fault_index] / total;
    for (int k = 0; k < n; ++k) {
        out.post_fault_voltages[members[k]] = v_pre[members[k]] - z_col[k] * out.current;
    }
    return out;
}

}  // namespace gridengine
