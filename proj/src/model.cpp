#include "gridengine/model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <unordered_set>

namespace gridengine {

const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::DuplicateId: return "duplicate-id";
    case ErrorKind::DanglingEndpoint: return "dangling-endpoint";
    case ErrorKind::InvalidValue: return "invalid-value";
    case ErrorKind::LayerDowngrade: return "layer-downgrade";
    case ErrorKind::UnknownBus: return "unknown-bus";
    case ErrorKind::UnknownBranch: return "unknown-branch";
    case ErrorKind::CycleDetected: return "cycle-detected";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::UnsupportedFeature: return "unsupported-feature";
    case ErrorKind::SchemaVersion: return "schema-version";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::ImpedanceTooSmall: return "impedance-too-small";
    case ErrorKind::ZeroReactance: return "zero-reactance";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::IsolatedBus: return "isolated-bus";
    case ErrorKind::MissingSlack: return "missing-slack";
    case ErrorKind::SingularJacobian: return "singular-jacobian";
    case ErrorKind::NotConverged: return "not-converged";
    case ErrorKind::Islanded: return "islanded";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

const char* to_string(Layer layer) noexcept
{
    switch (layer) {
    case Layer::Topology: return "Topology";
    case Layer::AcLoadflow: return "AcLoadflow";
    case Layer::AcShortCircuit: return "AcShortCircuit";
    case Layer::Dynamics: return "Dynamics";
    }
    return "?";
}

const char* to_string(BusKind kind) noexcept
{
    switch (kind) {
    case BusKind::Slack: return "Slack";
    case BusKind::PV: return "PV";
    case BusKind::PQ: return "PQ";
    case BusKind::Isolated: return "Isolated";
    }
    return "?";
}

const char* to_string(BranchKind kind) noexcept
{
    return kind == BranchKind::Line ? "Line" : "Transformer";
}

std::optional<Layer> layer_from_string(std::string_view text) noexcept
{
    for (auto layer : {Layer::Topology, Layer::AcLoadflow, Layer::AcShortCircuit, Layer::Dynamics}) {
        if (text == to_string(layer)) {
            return layer;
        }
    }
    return std::nullopt;
}

std::optional<BusKind> bus_kind_from_string(std::string_view text) noexcept
{
    for (auto kind : {BusKind::Slack, BusKind::PV, BusKind::PQ, BusKind::Isolated}) {
        if (text == to_string(kind)) {
            return kind;
        }
    }
    return std::nullopt;
}

std::optional<BranchKind> branch_kind_from_string(std::string_view text) noexcept
{
    if (text == "Line") {
        return BranchKind::Line;
    }
    if (text == "Transformer") {
        return BranchKind::Transformer;
    }
    return std::nullopt;
}

std::optional<std::size_t> NetworkModel::find_bus(std::string_view id) const
{
    auto it = bus_lookup_.find(std::string(id));
    if (it == bus_lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::size_t> NetworkModel::find_branch(std::string_view id) const
{
    auto it = branch_lookup_.find(std::string(id));
    if (it == branch_lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t NetworkModel::bus_index(std::string_view id) const
{
    if (auto idx = find_bus(id)) {
        return *idx;
    }
    throw Error(ErrorKind::UnknownBus, "unknown bus \"" + std::string(id) + "\" in network \"" + id_ + "\"");
}

std::size_t NetworkModel::branch_index(std::string_view id) const
{
    if (auto idx = find_branch(id)) {
        return *idx;
    }
    throw Error(ErrorKind::UnknownBranch,
                "unknown branch \"" + std::string(id) + "\" in network \"" + id_ + "\"");
}

bool NetworkModel::operator==(const NetworkModel& other) const
{
    return id_ == other.id_ && base_mva_ == other.base_mva_ && frequency_ == other.frequency_ &&
           layer_ == other.layer_ && z_min_ == other.z_min_ && buses_ == other.buses_ &&
           branches_ == other.branches_ && children_ == other.children_ && aux_ == other.aux_;
}

void NetworkModel::rebuild_indices()
{
    bus_lookup_.clear();
    branch_lookup_.clear();
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (!bus_lookup_.emplace(buses_[i].id, i).second) {
            throw Error(ErrorKind::DuplicateId, "duplicate bus id \"" + buses_[i].id + "\" in network \"" + id_ + "\"");
        }
    }
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        if (!branch_lookup_.emplace(branches_[i].id, i).second) {
            throw Error(ErrorKind::DuplicateId,
                        "duplicate branch id \"" + branches_[i].id + "\" in network \"" + id_ + "\"");
        }
    }
}

std::vector<std::string> NetworkModel::subtree_ids() const
{
    std::vector<std::string> ids{id_};
    for (const auto& link : children_) {
        auto sub = link.child->subtree_ids();
        ids.insert(ids.end(), sub.begin(), sub.end());
    }
    return ids;
}

namespace {

void require(bool ok, ErrorKind kind, const std::string& message)
{
    if (!ok) {
        throw Error(kind, message);
    }
}

bool finite(double v) { return std::isfinite(v); }

void validate_bus(const Bus& bus, Layer layer, const std::string& net)
{
    const std::string where = "bus \"" + bus.id + "\" in network \"" + net + "\"";
    require(!bus.id.empty(), ErrorKind::InvalidValue, "empty bus id in network \"" + net + "\"");
    for (double v : {bus.base_kv, bus.v_mag, bus.v_ang, bus.gen_p, bus.gen_q, bus.load_p, bus.load_q,
                     bus.shunt_g, bus.shunt_b, bus.q_max, bus.q_min}) {
        require(finite(v), ErrorKind::InvalidValue, "non-finite value on " + where);
    }
    require(bus.base_kv >= 0.0, ErrorKind::InvalidValue, "negative base_kv on " + where);
    if (bus.in_service && bus.kind != BusKind::Isolated) {
        require(bus.v_mag > 0.0, ErrorKind::InvalidValue, "nonpositive v_mag on " + where);
    }
    if (bus.short_circuit) {
        require(layer >= Layer::AcShortCircuit, ErrorKind::InvalidValue,
                "short-circuit data below AcShortCircuit layer on " + where);
        require(finite(bus.short_circuit->x_source) && bus.short_circuit->x_source >= 0.0,
                ErrorKind::InvalidValue, "invalid x_source on " + where);
    }
    if (bus.machine) {
        require(layer >= Layer::Dynamics, ErrorKind::InvalidValue, "machine data below Dynamics layer on " + where);
        const auto& m = *bus.machine;
        require(finite(m.h) && m.h > 0.0, ErrorKind::InvalidValue, "machine h must be > 0 on " + where);
        require(finite(m.xd_p) && m.xd_p > 0.0, ErrorKind::InvalidValue, "machine xd_p must be > 0 on " + where);
        require(finite(m.d), ErrorKind::InvalidValue, "non-finite machine damping on " + where);
    }
}

void validate_branch(const Branch& br, const NetworkModel& net)
{
    const std::string where = "branch \"" + br.id + "\" in network \"" + net.id() + "\"";
    require(!br.id.empty(), ErrorKind::InvalidValue, "empty branch id in network \"" + net.id() + "\"");
    for (const auto* end : {&br.from_bus, &br.to_bus}) {
        require(net.find_bus(*end).has_value(), ErrorKind::DanglingEndpoint,
                where + " references unknown bus \"" + *end + "\"");
    }
    require(br.from_bus != br.to_bus, ErrorKind::InvalidValue, where + " connects a bus to itself");
    for (double v : {br.r, br.x, br.b_total, br.tap, br.phase_shift, br.rating}) {
        require(finite(v), ErrorKind::InvalidValue, "non-finite value on " + where);
    }
    require(br.tap > 0.0, ErrorKind::InvalidValue, "tap must be > 0 on " + where);
    require(br.rating >= 0.0, ErrorKind::InvalidValue, "negative rating on " + where);
    if (br.kind == BranchKind::Line) {
        require(br.tap == 1.0 && br.phase_shift == 0.0, ErrorKind::InvalidValue,
                "line with off-nominal tap or phase shift: " + where);
    }
    if (br.in_service) {
        require(std::abs(std::complex<double>(br.r, br.x)) >= net.z_min(), ErrorKind::ImpedanceTooSmall,
                "series impedance below z_min on " + where);
    }
}

}  // namespace

void NetworkModel::validate() const
{
    require(finite(base_mva_) && base_mva_ > 0.0, ErrorKind::InvalidValue,
            "base_mva must be > 0 in network \"" + id_ + "\"");
    require(finite(frequency_) && frequency_ > 0.0, ErrorKind::InvalidValue,
            "frequency must be > 0 in network \"" + id_ + "\"");
    require(finite(z_min_) && z_min_ >= 0.0, ErrorKind::InvalidValue, "invalid z_min in network \"" + id_ + "\"");

    std::unordered_set<std::string> seen;
    for (const auto& bus : buses_) {
        require(seen.insert(bus.id).second, ErrorKind::DuplicateId,
                "duplicate bus id \"" + bus.id + "\" in network \"" + id_ + "\"");
        validate_bus(bus, layer_, id_);
    }
    seen.clear();
    for (const auto& br : branches_) {
        require(seen.insert(br.id).second, ErrorKind::DuplicateId,
                "duplicate branch id \"" + br.id + "\" in network \"" + id_ + "\"");
        validate_branch(br, *this);
    }

    for (const auto& link : children_) {
        require(find_bus(link.parent_bus).has_value(), ErrorKind::UnknownBus,
                "child link references unknown parent bus \"" + link.parent_bus + "\"");
        require(link.child->find_bus(link.child_boundary_bus).has_value(), ErrorKind::UnknownBus,
                "child link references unknown boundary bus \"" + link.child_boundary_bus + "\" in network \"" +
                    link.child->id() + "\"");
        link.child->validate();
    }

    auto ids = subtree_ids();
    std::unordered_set<std::string> unique_ids;
    for (const auto& id : ids) {
        if (!unique_ids.insert(id).second) {
            throw Error(id == id_ ? ErrorKind::CycleDetected : ErrorKind::DuplicateId,
                        "network \"" + id + "\" appears more than once under \"" + id_ + "\"");
        }
    }
}

NetworkModel build_network(NetworkSpec spec)
{
    NetworkModel net;
    net.id_ = std::move(spec.id);
    net.base_mva_ = spec.base_mva;
    net.frequency_ = spec.frequency;
    net.layer_ = spec.layer;
    net.z_min_ = spec.z_min;
    net.buses_ = std::move(spec.buses);
    net.branches_ = std::move(spec.branches);
    net.aux_ = std::move(spec.aux);
    net.rebuild_indices();
    for (auto& child : spec.children) {
        net.children_.push_back(
            ChildLink{std::move(child.parent_bus), std::move(child.child), std::move(child.child_boundary_bus)});
    }
    net.validate();
    return net;
}

NetworkModel extend_layer(const NetworkModel& net, Layer target)
{
    if (target < net.layer()) {
        throw Error(ErrorKind::LayerDowngrade, std::string("cannot move network \"") + net.id() + "\" from " +
                                                   to_string(net.layer()) + " down to " + to_string(target));
    }
    NetworkModel out = net;
    out.layer_ = target;
    return out;
}

ChildLink attach_child(NetworkModel& parent, std::string_view bus_id, NetworkModel child,
                       std::string_view child_boundary)
{
    parent.bus_index(bus_id);
    if (!child.find_bus(child_boundary)) {
        throw Error(ErrorKind::UnknownBus, "unknown boundary bus \"" + std::string(child_boundary) +
                                               "\" in child network \"" + child.id() + "\"");
    }
    auto child_ids = child.subtree_ids();
    if (std::find(child_ids.begin(), child_ids.end(), parent.id()) != child_ids.end()) {
        throw Error(ErrorKind::CycleDetected,
                    "attaching \"" + child.id() + "\" under \"" + parent.id() + "\" would create a cycle");
    }
    auto parent_ids = parent.subtree_ids();
    for (const auto& id : child_ids) {
        if (std::find(parent_ids.begin(), parent_ids.end(), id) != parent_ids.end()) {
            throw Error(ErrorKind::DuplicateId, "network \"" + id + "\" is already attached under \"" + parent.id() + "\"");
        }
    }
    ChildLink link{std::string(bus_id), Box<NetworkModel>(std::move(child)), std::string(child_boundary)};
    parent.children_.push_back(link);
    return link;
}

}  // namespace gridengine
