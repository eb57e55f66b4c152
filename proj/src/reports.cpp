#include "gridengine/reports.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gridengine {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

/// Ids may contain commas or quotes in principle; quote them when they do.
std::string csv_field(std::string_view text)
{
    if (text.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(text);
    }
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open \"" + path.string() + "\"");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) {
        throw Error(ErrorKind::Io, "cannot read \"" + path.string() + "\"");
    }
    return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw Error(ErrorKind::Io, "cannot create directory \"" + path.parent_path().string() + "\": " +
                                           ec.message());
        }
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorKind::Io, "cannot write \"" + tmp.string() + "\"");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            throw Error(ErrorKind::Io, "cannot write \"" + tmp.string() + "\"");
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorKind::Io, "cannot rename into \"" + path.string() + "\"");
    }
}

std::string format_number(double value)
{
    if (value == 0.0) {
        return "0";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

std::string loadflow_bus_csv(const NetworkModel& net, const LoadflowResult& lf)
{
    std::string out = "id,v_mag,v_ang_deg,p,q\n";
    const auto buses = net.buses();
    for (std::size_t i = 0; i < lf.bus_ids.size(); ++i) {
        const auto& b = buses[net.bus_index(lf.bus_ids[i])];
        out += csv_field(lf.bus_ids[i]) + "," + format_number(lf.v_mag[i]) + "," +
               format_number(lf.v_ang[i] * kDegPerRad) + "," + format_number(b.gen_p - b.load_p) + "," +
               format_number(b.gen_q - b.load_q) + "\n";
    }
    return out;
}

std::string loadflow_branch_csv(const LoadflowResult& lf)
{
    std::string out = "id,p_from,q_from,p_to,q_to\n";
    for (std::size_t m = 0; m < lf.branch_ids.size(); ++m) {
        const auto& f = lf.flows[m];
        out += csv_field(lf.branch_ids[m]) + "," + format_number(f.s_from.real()) + "," +
               format_number(f.s_from.imag()) + "," + format_number(f.s_to.real()) + "," +
               format_number(f.s_to.imag()) + "\n";
    }
    return out;
}

std::string contingency_csv(std::span<const CaResult> results)
{
    std::string out = "contingency,islanding,worst_branch,worst_flow,worst_rating,worst_percent,violations,error\n";
    for (const auto& r : results) {
        const Violation* worst = nullptr;
        for (const auto& v : r.violations) {
            if (!worst || v.flow / v.rating > worst->flow / worst->rating) {
                worst = &v;
            }
        }
        out += csv_field(r.contingency) + "," + (r.islanding ? "1" : "0") + ",";
        if (worst) {
            out += csv_field(worst->branch) + "," + format_number(worst->flow) + "," + format_number(worst->rating) +
                   "," + format_number(100.0 * worst->flow / worst->rating);
        } else {
            out += ",,,";
        }
        out += "," + std::to_string(r.violations.size()) + "," + csv_field(r.error.value_or("")) + "\n";
    }
    return out;
}

std::string exchange_trace_csv(std::span<const BoundaryExchange> trace)
{
    std::string out =
        "round,direction,bus,va_re,va_im,vb_re,vb_im,vc_re,vc_im,s_re,s_im,ineg_re,ineg_im,izero_re,izero_im\n";
    // The trace is a bit-level record, so it keeps full precision.
    auto exact = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& x : trace) {
        out += std::to_string(x.round) + "," + to_string(x.direction) + "," + csv_field(x.boundary_bus);
        for (const auto& v : x.v_abc) {
            out += "," + exact(v.real()) + "," + exact(v.imag());
        }
        for (const auto& v : {x.equivalent_load, x.i_neg, x.i_zero}) {
            out += "," + exact(v.real()) + "," + exact(v.imag());
        }
        out += "\n";
    }
    return out;
}

std::string trajectory_csv(const Trajectory& traj)
{
    std::string out = "time";
    for (const auto& g : traj.generators) {
        out += ",delta:" + csv_field(g);
    }
    for (const auto& g : traj.generators) {
        out += ",omega_dev:" + csv_field(g);
    }
    for (const auto& b : traj.buses) {
        out += ",v_mag:" + csv_field(b);
    }
    out += "\n";
    for (std::size_t k = 0; k < traj.time.size(); ++k) {
        out += format_number(traj.time[k]);
        for (const auto& series : traj.delta) {
            out += "," + format_number(series[k]);
        }
        for (const auto& series : traj.omega_dev) {
            out += "," + format_number(series[k]);
        }
        for (const auto& series : traj.v_mag) {
            out += "," + format_number(series[k]);
        }
        out += "\n";
    }
    return out;
}

std::string trajectory_manifest(const Trajectory& traj)
{
    nlohmann::json columns = nlohmann::json::array();
    columns.push_back({{"column", "time"}, {"quantity", "time"}, {"unit", "s"}});
    for (const auto& g : traj.generators) {
        columns.push_back({{"column", "delta:" + g}, {"quantity", "rotor angle"}, {"unit", "rad"}, {"bus", g}});
    }
    for (const auto& g : traj.generators) {
        columns.push_back(
            {{"column", "omega_dev:" + g}, {"quantity", "speed deviation"}, {"unit", "pu"}, {"bus", g}});
    }
    for (const auto& b : traj.buses) {
        columns.push_back({{"column", "v_mag:" + b}, {"quantity", "voltage magnitude"}, {"unit", "pu"}, {"bus", b}});
    }
    return nlohmann::json{{"columns", columns}}.dump(2) + "\n";
}

std::vector<DynEvent> parse_events(std::string_view text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("events file is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) {
        throw Error(ErrorKind::Schema, "/: events file must be a JSON list");
    }
    std::vector<DynEvent> events;
    for (std::size_t k = 0; k < doc.size(); ++k) {
        const auto path = "/" + std::to_string(k);
        const auto& item = doc[k];
        if (!item.is_object()) {
            throw Error(ErrorKind::Schema, path + ": expected an object");
        }
        for (const auto& field : item.items()) {
            if (field.key() != "time" && field.key() != "kind" && field.key() != "target" &&
                field.key() != "z_fault") {
                throw Error(ErrorKind::Schema, path + "/" + field.key() + ": unknown field");
            }
        }
        DynEvent ev;
        if (!item.contains("time") || !item["time"].is_number()) {
            throw Error(ErrorKind::Schema, path + "/time: expected a number");
        }
        ev.time = item["time"].get<double>();
        if (!item.contains("kind") || !item["kind"].is_string()) {
            throw Error(ErrorKind::Schema, path + "/kind: expected a string");
        }
        const auto kind = dyn_event_kind_from_string(item["kind"].get<std::string>());
        if (!kind) {
            throw Error(ErrorKind::Schema, path + "/kind: unknown event kind");
        }
        ev.kind = *kind;
        if (!item.contains("target") || !item["target"].is_string()) {
            throw Error(ErrorKind::Schema, path + "/target: expected a string");
        }
        ev.target = item["target"].get<std::string>();
        if (item.contains("z_fault")) {
            const auto& z = item["z_fault"];
            if (!z.is_array() || z.size() != 2 || !z[0].is_number() || !z[1].is_number()) {
                throw Error(ErrorKind::Schema, path + "/z_fault: expected [re, im]");
            }
            ev.z_fault = {z[0].get<double>(), z[1].get<double>()};
        }
        events.push_back(std::move(ev));
    }
    return events;
}

}  // namespace gridengine
