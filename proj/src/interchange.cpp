#include "gridengine/interchange.hpp"

#include <cmath>
#include <initializer_list>
#include <set>

#include <nlohmann/json.hpp>

namespace gridengine {

namespace {

using nlohmann::json;

// ---- writing --------------------------------------------------------------

json aux_to_json(const AuxMap& aux)
{
    json out = json::object();
    for (const auto& [key, value] : aux) {
        out[key] = value;
    }
    return out;
}

json bus_to_json(const Bus& bus)
{
    json out = {
        {"id", bus.id},           {"name", bus.name},         {"base_kv", bus.base_kv},
        {"area", bus.area},       {"in_service", bus.in_service},
        {"kind", to_string(bus.kind)},
        {"v_mag", bus.v_mag},     {"v_ang", bus.v_ang},       {"gen_p", bus.gen_p},
        {"gen_q", bus.gen_q},     {"load_p", bus.load_p},     {"load_q", bus.load_q},
        {"shunt_g", bus.shunt_g}, {"shunt_b", bus.shunt_b},   {"q_max", bus.q_max},
        {"q_min", bus.q_min},     {"aux", aux_to_json(bus.aux)},
    };
    if (bus.short_circuit) {
        out["short_circuit"] = {{"x_source", bus.short_circuit->x_source}};
    }
    if (bus.machine) {
        out["machine"] = {{"h", bus.machine->h}, {"d", bus.machine->d}, {"xd_p", bus.machine->xd_p}};
    }
    return out;
}

json branch_to_json(const Branch& br)
{
    return {
        {"id", br.id},
        {"from_bus", br.from_bus},
        {"to_bus", br.to_bus},
        {"kind", to_string(br.kind)},
        {"r", br.r},
        {"x", br.x},
        {"b_total", br.b_total},
        {"tap", br.tap},
        {"phase_shift", br.phase_shift},
        {"rating", br.rating},
        {"in_service", br.in_service},
        {"aux", aux_to_json(br.aux)},
    };
}

json network_to_json(const NetworkModel& net)
{
    json buses = json::array();
    for (const auto& bus : net.buses()) {
        buses.push_back(bus_to_json(bus));
    }
    json branches = json::array();
    for (const auto& br : net.branches()) {
        branches.push_back(branch_to_json(br));
    }
    json children = json::array();
    for (const auto& link : net.children()) {
        children.push_back({
            {"parent_bus", link.parent_bus},
            {"child_boundary_bus", link.child_boundary_bus},
            {"network", network_to_json(*link.child)},
        });
    }
    return {
        {"id", net.id()},
        {"base_mva", net.base_mva()},
        {"frequency", net.frequency()},
        {"layer", to_string(net.layer())},
        {"z_min", net.z_min()},
        {"aux", aux_to_json(net.aux())},
        {"buses", std::move(buses)},
        {"branches", std::move(branches)},
        {"children", std::move(children)},
    };
}

// ---- reading --------------------------------------------------------------

[[noreturn]] void schema_error(const std::string& path, const std::string& what)
{
    throw Error(ErrorKind::Schema, (path.empty() ? std::string("/") : path) + ": " + what);
}

/// Strict view of one JSON object: every key must be consumed or listed.
class ObjectReader {
public:
    ObjectReader(const json& value, std::string path, std::initializer_list<const char*> allowed)
        : value_(value), path_(std::move(path))
    {
        if (!value_.is_object()) {
            schema_error(path_, "expected an object");
        }
        std::set<std::string> keys(allowed.begin(), allowed.end());
        for (const auto& item : value_.items()) {
            if (!keys.contains(item.key())) {
                schema_error(path_ + "/" + item.key(), "unknown field");
            }
        }
    }

    const json* find(const char* key) const
    {
        auto it = value_.find(key);
        return it == value_.end() ? nullptr : &*it;
    }

    std::string child_path(const char* key) const { return path_ + "/" + key; }

    std::string required_string(const char* key) const
    {
        const auto* v = find(key);
        if (!v) {
            schema_error(child_path(key), "required field is missing");
        }
        if (!v->is_string()) {
            schema_error(child_path(key), "expected a string");
        }
        return v->get<std::string>();
    }

    std::string string_or(const char* key, std::string fallback) const
    {
        const auto* v = find(key);
        if (!v) {
            return fallback;
        }
        if (!v->is_string()) {
            schema_error(child_path(key), "expected a string");
        }
        return v->get<std::string>();
    }

    double number_or(const char* key, double fallback) const
    {
        const auto* v = find(key);
        if (!v) {
            return fallback;
        }
        if (!v->is_number()) {
            schema_error(child_path(key), "expected a number");
        }
        const double d = v->get<double>();
        if (!std::isfinite(d)) {
            schema_error(child_path(key), "expected a finite number");
        }
        return d;
    }

    int integer_or(const char* key, int fallback) const
    {
        const auto* v = find(key);
        if (!v) {
            return fallback;
        }
        if (!v->is_number_integer()) {
            schema_error(child_path(key), "expected an integer");
        }
        return v->get<int>();
    }

    bool bool_or(const char* key, bool fallback) const
    {
        const auto* v = find(key);
        if (!v) {
            return fallback;
        }
        if (!v->is_boolean()) {
            schema_error(child_path(key), "expected true or false");
        }
        return v->get<bool>();
    }

    AuxMap aux(const char* key) const
    {
        AuxMap out;
        const auto* v = find(key);
        if (!v) {
            return out;
        }
        if (!v->is_object()) {
            schema_error(child_path(key), "expected an object of strings");
        }
        for (const auto& item : v->items()) {
            if (!item.value().is_string()) {
                schema_error(child_path(key) + "/" + item.key(), "expected a string");
            }
            out[item.key()] = item.value().get<std::string>();
        }
        return out;
    }

    const json& array(const char* key) const
    {
        static const json empty = json::array();
        const auto* v = find(key);
        if (!v) {
            return empty;
        }
        if (!v->is_array()) {
            schema_error(child_path(key), "expected an array");
        }
        return *v;
    }

private:
    const json& value_;
    std::string path_;
};

Bus bus_from_json(const json& value, const std::string& path)
{
    const ObjectReader r(value, path,
                         {"id", "name", "base_kv", "area", "in_service", "kind", "v_mag", "v_ang", "gen_p", "gen_q",
                          "load_p", "load_q", "shunt_g", "shunt_b", "q_max", "q_min", "short_circuit", "machine",
                          "aux"});
    Bus bus;
    bus.id = r.required_string("id");
    bus.name = r.string_or("name", "");
    bus.base_kv = r.number_or("base_kv", 0.0);
    bus.area = r.integer_or("area", 1);
    bus.in_service = r.bool_or("in_service", true);
    const auto kind = r.string_or("kind", "PQ");
    const auto parsed = bus_kind_from_string(kind);
    if (!parsed) {
        schema_error(r.child_path("kind"), "unknown bus kind \"" + kind + "\"");
    }
    bus.kind = *parsed;
    bus.v_mag = r.number_or("v_mag", 1.0);
    bus.v_ang = r.number_or("v_ang", 0.0);
    bus.gen_p = r.number_or("gen_p", 0.0);
    bus.gen_q = r.number_or("gen_q", 0.0);
    bus.load_p = r.number_or("load_p", 0.0);
    bus.load_q = r.number_or("load_q", 0.0);
    bus.shunt_g = r.number_or("shunt_g", 0.0);
    bus.shunt_b = r.number_or("shunt_b", 0.0);
    bus.q_max = r.number_or("q_max", 0.0);
    bus.q_min = r.number_or("q_min", 0.0);
    if (const auto* sc = r.find("short_circuit")) {
        const ObjectReader s(*sc, r.child_path("short_circuit"), {"x_source"});
        bus.short_circuit = ShortCircuitData{s.number_or("x_source", 0.0)};
    }
    if (const auto* m = r.find("machine")) {
        const ObjectReader s(*m, r.child_path("machine"), {"h", "d", "xd_p"});
        bus.machine = MachineData{s.number_or("h", 0.0), s.number_or("d", 0.0), s.number_or("xd_p", 0.0)};
    }
    bus.aux = r.aux("aux");
    return bus;
}

Branch branch_from_json(const json& value, const std::string& path)
{
    const ObjectReader r(value, path,
                         {"id", "from_bus", "to_bus", "kind", "r", "x", "b_total", "tap", "phase_shift", "rating",
                          "in_service", "aux"});
    Branch br;
    br.id = r.required_string("id");
    br.from_bus = r.required_string("from_bus");
    br.to_bus = r.required_string("to_bus");
    const auto kind = r.string_or("kind", "Line");
    const auto parsed = branch_kind_from_string(kind);
    if (!parsed) {
        schema_error(r.child_path("kind"), "unknown branch kind \"" + kind + "\"");
    }
    br.kind = *parsed;
    br.r = r.number_or("r", 0.0);
    br.x = r.number_or("x", 0.0);
    br.b_total = r.number_or("b_total", 0.0);
    br.tap = r.number_or("tap", 1.0);
    br.phase_shift = r.number_or("phase_shift", 0.0);
    br.rating = r.number_or("rating", 0.0);
    br.in_service = r.bool_or("in_service", true);
    br.aux = r.aux("aux");
    return br;
}

NetworkModel network_from_json(const json& value, const std::string& path)
{
    const ObjectReader r(value, path,
                         {"id", "base_mva", "frequency", "layer", "z_min", "aux", "buses", "branches", "children"});
    NetworkSpec spec;
    spec.id = r.required_string("id");
    spec.base_mva = r.number_or("base_mva", 100.0);
    spec.frequency = r.number_or("frequency", 60.0);
    const auto layer = r.string_or("layer", "Topology");
    const auto parsed = layer_from_string(layer);
    if (!parsed) {
        schema_error(r.child_path("layer"), "unknown layer \"" + layer + "\"");
    }
    spec.layer = *parsed;
    spec.z_min = r.number_or("z_min", kDefaultMinImpedance);
    spec.aux = r.aux("aux");

    const auto& buses = r.array("buses");
    for (std::size_t k = 0; k < buses.size(); ++k) {
        spec.buses.push_back(bus_from_json(buses[k], r.child_path("buses") + "/" + std::to_string(k)));
    }
    const auto& branches = r.array("branches");
    for (std::size_t k = 0; k < branches.size(); ++k) {
        spec.branches.push_back(branch_from_json(branches[k], r.child_path("branches") + "/" + std::to_string(k)));
    }
    const auto& children = r.array("children");
    for (std::size_t k = 0; k < children.size(); ++k) {
        const auto child_path = r.child_path("children") + "/" + std::to_string(k);
        const ObjectReader c(children[k], child_path, {"parent_bus", "child_boundary_bus", "network"});
        const auto* child = c.find("network");
        if (!child) {
            schema_error(c.child_path("network"), "required field is missing");
        }
        spec.children.push_back({c.required_string("parent_bus"),
                                 network_from_json(*child, c.child_path("network")),
                                 c.required_string("child_boundary_bus")});
    }
    return build_network(std::move(spec));
}

}  // namespace

NetworkModel parse_interchange(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("interchange document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        schema_error("", "expected an object");
    }
    auto version = doc.find("schema_version");
    if (version == doc.end()) {
        throw Error(ErrorKind::SchemaVersion, "/schema_version: required field is missing");
    }
    if (!version->is_string() || version->get<std::string>() != kInterchangeSchemaVersion) {
        throw Error(ErrorKind::SchemaVersion,
                    "/schema_version: unsupported version " + version->dump() + " (supported: \"" +
                        kInterchangeSchemaVersion + "\")");
    }
    const ObjectReader r(doc, "", {"schema_version", "network"});
    const auto* network = r.find("network");
    if (!network) {
        schema_error("/network", "required field is missing");
    }
    return network_from_json(*network, "/network");
}

std::string write_interchange(const NetworkModel& net)
{
    const json doc = {{"schema_version", kInterchangeSchemaVersion}, {"network", network_to_json(net)}};
    return doc.dump(2) + "\n";
}

std::uint64_t model_fingerprint(const NetworkModel& net)
{
    std::uint64_t hash = 1469598103934665603ULL;
    for (const unsigned char c : write_interchange(net)) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

}  // namespace gridengine
