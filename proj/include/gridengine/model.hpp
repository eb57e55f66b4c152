#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gridengine/error.hpp"

namespace gridengine {

// Layers are ordered; a model at one layer carries every field group of the
// layers below it.
enum class Layer { Topology = 0, AcLoadflow = 1, AcShortCircuit = 2, Dynamics = 3 };
enum class BusKind { Slack, PV, PQ, Isolated };
enum class BranchKind { Line, Transformer };

const char* to_string(Layer layer) noexcept;
const char* to_string(BusKind kind) noexcept;
const char* to_string(BranchKind kind) noexcept;
std::optional<Layer> layer_from_string(std::string_view text) noexcept;
std::optional<BusKind> bus_kind_from_string(std::string_view text) noexcept;
std::optional<BranchKind> branch_kind_from_string(std::string_view text) noexcept;

inline constexpr double kDefaultMinImpedance = 1e-8;

/// Free-form key/value data carried through adapters without interpretation.
using AuxMap = std::map<std::string, std::string>;

/// AcShortCircuit field group: positive-sequence source reactance behind the
/// bus (pu). A Slack bus without this group acts as an ideal source.
struct ShortCircuitData {
    double x_source = 0.0;
    bool operator==(const ShortCircuitData&) const = default;
};

/// Dynamics field group: classical machine parameters of the bus generator.
struct MachineData {
    double h = 0.0;     // inertia constant, s
    double d = 0.0;     // damping, pu
    double xd_p = 0.0;  // transient reactance, pu
    bool operator==(const MachineData&) const = default;
};

struct Bus {
    // Topology
    std::string id;
    std::string name;
    double base_kv = 0.0;
    int area = 1;
    bool in_service = true;

    // AcLoadflow
    BusKind kind = BusKind::PQ;
    double v_mag = 1.0;
    double v_ang = 0.0;
    double gen_p = 0.0;
    double gen_q = 0.0;
    double load_p = 0.0;
    double load_q = 0.0;
    double shunt_g = 0.0;
    double shunt_b = 0.0;
    // Reactive limits for PV buses; inactive unless q_max > q_min.
    double q_max = 0.0;
    double q_min = 0.0;

    std::optional<ShortCircuitData> short_circuit;
    std::optional<MachineData> machine;

    AuxMap aux;

    bool operator==(const Bus&) const = default;
};

struct Branch {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    BranchKind kind = BranchKind::Line;
    double r = 0.0;
    double x = 0.0;
    double b_total = 0.0;
    double tap = 1.0;
    double phase_shift = 0.0;
    double rating = 0.0;  // 0 = unlimited
    bool in_service = true;

    AuxMap aux;

    bool operator==(const Branch&) const = default;
};

/// Owning pointer with value semantics (deep copy, deep equality). Lets a
/// network hold child networks by value.
template <class T>
class Box {
public:
    Box() : ptr_(std::make_unique<T>()) {}
    Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
    Box(const Box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
    Box(Box&&) noexcept = default;
    Box& operator=(const Box& other)
    {
        if (this != &other) {
            ptr_ = std::make_unique<T>(*other.ptr_);
        }
        return *this;
    }
    Box& operator=(Box&&) noexcept = default;
    ~Box() = default;

    T& operator*() { return *ptr_; }
    const T& operator*() const { return *ptr_; }
    T* operator->() { return ptr_.get(); }
    const T* operator->() const { return ptr_.get(); }

    friend bool operator==(const Box& a, const Box& b) { return *a.ptr_ == *b.ptr_; }

private:
    std::unique_ptr<T> ptr_;
};

class NetworkModel;

struct ChildLink {
    std::string parent_bus;
    Box<NetworkModel> child;
    std::string child_boundary_bus;

    friend bool operator==(const ChildLink&, const ChildLink&) = default;
};

/// Declarative description consumed by build_network.
struct NetworkSpec {
    struct Child {
        std::string parent_bus;
        Box<NetworkModel> child;
        std::string child_boundary_bus;
    };

    std::string id;
    double base_mva = 100.0;
    double frequency = 60.0;
    Layer layer = Layer::Topology;
    double z_min = kDefaultMinImpedance;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Child> children;
    AuxMap aux;
};

/// Bus/branch network with nested child networks.
///
/// Ids and ordering are fixed at construction (insertion order is iteration
/// order everywhere). Algorithms that write solution state go through
/// bus_at/branch_at; they must not change ids or endpoints.
class NetworkModel {
public:
    NetworkModel() = default;

    const std::string& id() const noexcept { return id_; }
    double base_mva() const noexcept { return base_mva_; }
    double frequency() const noexcept { return frequency_; }
    Layer layer() const noexcept { return layer_; }
    double z_min() const noexcept { return z_min_; }
    const AuxMap& aux() const noexcept { return aux_; }

    std::span<const Bus> buses() const noexcept { return buses_; }
    std::span<const Branch> branches() const noexcept { return branches_; }
    std::span<const ChildLink> children() const noexcept { return children_; }

    std::optional<std::size_t> find_bus(std::string_view id) const;
    std::optional<std::size_t> find_branch(std::string_view id) const;
    /// Throws UnknownBus / UnknownBranch.
    std::size_t bus_index(std::string_view id) const;
    std::size_t branch_index(std::string_view id) const;

    const Bus& bus(std::string_view id) const { return buses_[bus_index(id)]; }
    const Branch& branch(std::string_view id) const { return branches_[branch_index(id)]; }

    Bus& bus_at(std::size_t index) { return buses_.at(index); }
    Branch& branch_at(std::size_t index) { return branches_.at(index); }
    NetworkModel& child_at(std::size_t index) { return *children_.at(index).child; }

    /// Re-checks every type invariant, recursively through child networks.
    void validate() const;

    /// Ids of this network and of every descendant, depth first.
    std::vector<std::string> subtree_ids() const;

    bool operator==(const NetworkModel& other) const;

private:
    friend NetworkModel build_network(NetworkSpec spec);
    friend NetworkModel extend_layer(const NetworkModel& net, Layer target);
    friend ChildLink attach_child(NetworkModel& parent, std::string_view bus_id, NetworkModel child,
                                  std::string_view child_boundary);

    void rebuild_indices();

    std::string id_;
    double base_mva_ = 100.0;
    double frequency_ = 60.0;
    Layer layer_ = Layer::Topology;
    double z_min_ = kDefaultMinImpedance;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<ChildLink> children_;
    AuxMap aux_;
    std::unordered_map<std::string, std::size_t> bus_lookup_;
    std::unordered_map<std::string, std::size_t> branch_lookup_;
};

/// Validated model from a declarative spec. Errors: DuplicateId,
/// DanglingEndpoint (message names the missing bus), InvalidValue,
/// ImpedanceTooSmall, CycleDetected.
NetworkModel build_network(NetworkSpec spec);

/// Same model at a higher layer; lower-layer data is untouched.
NetworkModel extend_layer(const NetworkModel& net, Layer target);

/// Nests `child` under `bus_id` of `parent`. Several children may share a bus.
ChildLink attach_child(NetworkModel& parent, std::string_view bus_id, NetworkModel child,
                       std::string_view child_boundary);

}  // namespace gridengine
