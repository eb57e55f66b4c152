#include "gridengine/ybus.hpp"

#include <cstdio>
#include <ostream>

namespace gridengine {

void require_layer(const NetworkModel& net, Layer minimum, std::string_view operation)
{
    if (net.layer() < minimum) {
        throw Error(ErrorKind::InvalidValue, std::string(operation) + " needs network \"" + net.id() +
                                                 "\" at layer " + to_string(minimum) + " or above (found " +
                                                 to_string(net.layer()) + ")");
    }
}

BranchStamp branch_stamp(const Branch& br)
{
    const Complex y = 1.0 / Complex(br.r, br.x);
    const Complex charging(0.0, br.b_total / 2.0);
    const double t = br.tap;
    const Complex shift = std::polar(1.0, br.phase_shift);
    BranchStamp s;
    s.yff = (y + charging) / (t * t);
    s.ytt = y + charging;
    s.yft = -y / (t * std::conj(shift));
    s.ytf = -y / (t * shift);
    return s;
}

std::optional<int> AdmittanceMatrix::index_of(std::string_view bus_id) const
{
    for (std::size_t i = 0; i < bus_ids.size(); ++i) {
        if (bus_ids[i] == bus_id) {
            return static_cast<int>(i);
        }
    }
    return std::nullopt;
}

Complex AdmittanceMatrix::at(std::string_view row_bus, std::string_view col_bus) const
{
    const auto r = index_of(row_bus);
    const auto c = index_of(col_bus);
    if (!r || !c) {
        throw Error(ErrorKind::UnknownBus, "bus not present in admittance matrix");
    }
    return y.coeff(*r, *c);
}

namespace {

std::vector<int> dense_numbering(const NetworkModel& net, std::vector<std::size_t>& model_index,
                                 std::vector<std::string>& ids)
{
    const auto buses = net.buses();
    std::vector<int> dense(buses.size(), -1);
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].in_service) {
            dense[i] = static_cast<int>(model_index.size());
            model_index.push_back(i);
            ids.push_back(buses[i].id);
        }
    }
    return dense;
}

}  // namespace

AdmittanceMatrix build_ybus(const NetworkModel& net)
{
    require_layer(net, Layer::AcLoadflow, "build_ybus");
    AdmittanceMatrix out;
    out.dense_index = dense_numbering(net, out.model_index, out.bus_ids);
    const auto n = static_cast<int>(out.model_index.size());

    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(4 * net.branches().size() + out.model_index.size());
    for (std::size_t k = 0; k < out.model_index.size(); ++k) {
        const auto& bus = net.buses()[out.model_index[k]];
        const auto i = static_cast<int>(k);
        triplets.emplace_back(i, i, Complex(bus.shunt_g, bus.shunt_b));
    }
    for (const auto& br : net.branches()) {
        if (!br.in_service) {
            continue;
        }
        const int f = out.dense_index[net.bus_index(br.from_bus)];
        const int t = out.dense_index[net.bus_index(br.to_bus)];
        if (f < 0 || t < 0) {
            continue;
        }
        if (std::abs(Complex(br.r, br.x)) < net.z_min()) {
            throw Error(ErrorKind::ImpedanceTooSmall, "branch \"" + br.id + "\" has series impedance below z_min");
        }
        const auto s = branch_stamp(br);
        triplets.emplace_back(f, f, s.yff);
        triplets.emplace_back(f, t, s.yft);
        triplets.emplace_back(t, f, s.ytf);
        triplets.emplace_back(t, t, s.ytt);
    }
    out.y.resize(n, n);
    out.y.setFromTriplets(triplets.begin(), triplets.end());
    out.y.makeCompressed();
    return out;
}

SusceptanceMatrix build_bprime(const NetworkModel& net, bool slack_removed)
{
    require_layer(net, Layer::AcLoadflow, "build_bprime");
    const auto buses = net.buses();
    SusceptanceMatrix out;
    out.reduced_index.assign(buses.size(), -1);
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (!buses[i].in_service || (slack_removed && buses[i].kind == BusKind::Slack)) {
            continue;
        }
        out.reduced_index[i] = static_cast<int>(out.model_index.size());
        out.model_index.push_back(i);
        out.bus_ids.push_back(buses[i].id);
    }
    std::vector<Eigen::Triplet<double>> triplets;
    for (const auto& br : net.branches()) {
        if (!br.in_service) {
            continue;
        }
        const auto fi = net.bus_index(br.from_bus);
        const auto ti = net.bus_index(br.to_bus);
        if (!buses[fi].in_service || !buses[ti].in_service) {
            continue;
        }
        if (br.x == 0.0) {
            throw Error(ErrorKind::ZeroReactance, "branch \"" + br.id + "\" has zero reactance");
        }
        const double b = 1.0 / br.x;
        const int f = out.reduced_index[fi];
        const int t = out.reduced_index[ti];
        if (f >= 0) {
            triplets.emplace_back(f, f, b);
        }
        if (t >= 0) {
            triplets.emplace_back(t, t, b);
        }
        if (f >= 0 && t >= 0) {
            triplets.emplace_back(f, t, -b);
            triplets.emplace_back(t, f, -b);
        }
    }
    const auto n = static_cast<int>(out.model_index.size());
    out.b.resize(n, n);
    out.b.setFromTriplets(triplets.begin(), triplets.end());
    out.b.makeCompressed();
    return out;
}

void write_coordinate(std::ostream& os, const AdmittanceMatrix& ybus)
{
    char line[128];
    for (int k = 0; k < ybus.y.outerSize(); ++k) {
        for (ComplexSparse::InnerIterator it(ybus.y, k); it; ++it) {
            std::snprintf(line, sizeof line, "%d %d %.17g %.17g\n", static_cast<int>(it.row()),
                          static_cast<int>(it.col()), it.value().real(), it.value().imag());
            os << line;
        }
    }
}

}  // namespace gridengine
