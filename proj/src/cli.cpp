#include "gridengine/cli.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridengine/cdf.hpp"
#include "gridengine/contingency.hpp"
#include "gridengine/cosim.hpp"
#include "gridengine/dynamics.hpp"
#include "gridengine/interchange.hpp"
#include "gridengine/loadflow.hpp"
#include "gridengine/reports.hpp"
#include "gridengine/synthetic.hpp"
#include "gridengine/transport.hpp"

namespace gridengine {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Input problems found before any computation: exit status 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Settings {
    LoadflowConfig loadflow;
    CoSimConfig cosim;
    DynConfig dyn;
};

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw UsageError("--set " + key + " expects true or false, got \"" + value + "\"");
}

double parse_real(const std::string& key, const std::string& value)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used == value.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw UsageError("--set " + key + " expects a number, got \"" + value + "\"");
}

int parse_int(const std::string& key, const std::string& value)
{
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used == value.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw UsageError("--set " + key + " expects an integer, got \"" + value + "\"");
}

Settings make_settings(const std::vector<std::string>& overrides)
{
    Settings s;
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw UsageError("--set expects key=value, got \"" + item + "\"");
        }
        const auto key = item.substr(0, eq);
        const auto value = item.substr(eq + 1);
        if (key == "tolerance") {
            s.loadflow.tolerance = parse_real(key, value);
        } else if (key == "max_iterations") {
            s.loadflow.max_iterations = parse_int(key, value);
        } else if (key == "flat_start") {
            s.loadflow.flat_start = parse_bool(key, value);
        } else if (key == "enforce_q_limits") {
            s.loadflow.enforce_q_limits = parse_bool(key, value);
        } else if (key == "max_outer_iterations") {
            s.cosim.max_outer_iterations = parse_int(key, value);
        } else if (key == "boundary_tolerance") {
            s.cosim.boundary_tolerance = parse_real(key, value);
        } else if (key == "dt") {
            s.dyn.dt = parse_real(key, value);
        } else if (key == "t_end") {
            s.dyn.t_end = parse_real(key, value);
        } else {
            throw UsageError("unknown --set key \"" + key + "\"");
        }
    }
    s.cosim.loadflow = s.loadflow;
    try {
        s.loadflow.validate();
        s.cosim.validate();
        s.dyn.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return s;
}

void require_input(const std::string& path)
{
    if (!fs::is_regular_file(path)) {
        throw UsageError("input file \"" + path + "\" does not exist");
    }
}

std::string extension_of(const std::string& path)
{
    auto ext = fs::path(path).extension().string();
    for (auto& c : ext) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return ext;
}

/// Reads .cdf or .json; "synthetic:N" generates an N-bus grid from the seed.
NetworkModel load_case(const std::string& path, std::uint64_t seed)
{
    if (path.rfind("synthetic:", 0) == 0) {
        const auto count = path.substr(10);
        try {
            std::size_t used = 0;
            const int n = std::stoi(count, &used);
            if (used == count.size()) {
                return synthetic_grid(n, seed);
            }
        } catch (const std::invalid_argument&) {
        } catch (const std::out_of_range&) {
        }
        throw UsageError("\"" + path + "\" is not synthetic:<bus count>");
    }
    require_input(path);
    const auto ext = extension_of(path);
    const auto text = read_file(path);
    try {
        if (ext == ".cdf") {
            return parse_cdf(text);
        }
        if (ext == ".json") {
            return parse_interchange(text);
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Parse || e.kind() == ErrorKind::Schema || e.kind() == ErrorKind::SchemaVersion) {
            throw UsageError("\"" + path + "\": " + e.what());
        }
        throw;
    }
    throw UsageError("cannot infer the format of \"" + path + "\" (expected .cdf or .json)");
}

void write_summary(const fs::path& dir, json summary, double seconds)
{
    write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
    // Wall-clock time changes from run to run, so it lives apart from the
    // deterministic result files.
    write_file_atomic(dir / "timing.json", json{{"seconds", seconds}}.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Feeder file: interchange document whose network aux holds "parent_bus";
/// the head bus is aux "boundary_bus" or else the feeder's only slack bus.
struct FeederFile {
    NetworkModel net;
    std::string parent_bus;
    std::string head_bus;
};

FeederFile load_feeder(const std::string& path)
{
    require_input(path);
    FeederFile f;
    try {
        f.net = parse_interchange(read_file(path));
    } catch (const Error& e) {
        throw UsageError("\"" + path + "\": " + e.what());
    }
    const auto& aux = f.net.aux();
    auto parent = aux.find("parent_bus");
    if (parent == aux.end()) {
        throw UsageError("feeder \"" + path + "\" has no \"parent_bus\" entry in its network aux map");
    }
    f.parent_bus = parent->second;
    if (auto head = aux.find("boundary_bus"); head != aux.end()) {
        f.head_bus = head->second;
    } else {
        for (const auto& b : f.net.buses()) {
            if (b.kind == BusKind::Slack) {
                if (!f.head_bus.empty()) {
                    throw UsageError("feeder \"" + path + "\" has several slack buses; set aux \"boundary_bus\"");
                }
                f.head_bus = b.id;
            }
        }
        if (f.head_bus.empty()) {
            throw UsageError("feeder \"" + path + "\" has no slack bus; set aux \"boundary_bus\"");
        }
    }
    if (!f.net.find_bus(f.head_bus)) {
        throw UsageError("feeder \"" + path + "\" boundary bus \"" + f.head_bus + "\" does not exist");
    }
    return f;
}

std::string safe_name(std::string id)
{
    for (auto& c : id) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') {
            c = '_';
        }
    }
    return id;
}

// ---- commands --------------------------------------------------------------

int cmd_loadflow(const std::string& case_path, const fs::path& out, const Settings& s, std::uint64_t seed,
                 std::ostream& err)
{
    auto net = load_case(case_path, seed);
    const auto start = std::chrono::steady_clock::now();
    const auto lf = solve_newton_raphson(net, s.loadflow);
    const double elapsed = seconds_since(start);
    write_file_atomic(out / "buses.csv", loadflow_bus_csv(net, lf));
    write_file_atomic(out / "branches.csv", loadflow_branch_csv(lf));
    json slack = json::array();
    for (const auto& sl : lf.slack) {
        slack.push_back({{"bus", sl.bus}, {"gen_p", sl.gen_p}, {"gen_q", sl.gen_q}});
    }
    write_summary(out,
                  {{"command", "loadflow"},
                   {"network", net.id()},
                   {"converged", lf.converged},
                   {"iterations", lf.iterations},
                   {"max_mismatch", lf.max_mismatch},
                   {"buses", net.buses().size()},
                   {"branches", net.branches().size()},
                   {"slack", slack}},
                  elapsed);
    if (!lf.converged) {
        err << "loadflow of \"" << net.id() << "\" did not converge after " << lf.iterations
            << " iterations (max mismatch " << lf.max_mismatch << " pu)\n";
        return kExitDomainFailure;
    }
    return kExitOk;
}

int cmd_nminus1(const std::string& case_path, const fs::path& out, int workers, bool fail_on_violation,
                std::uint64_t seed, std::ostream& err)
{
    if (workers < 1) {
        throw UsageError("--workers must be >= 1");
    }
    const auto net = load_case(case_path, seed);
    const auto specs = all_branch_outages(net);
    const auto start = std::chrono::steady_clock::now();
    const auto results = run_n1(net, specs, workers);
    const double elapsed = seconds_since(start);
    write_file_atomic(out / "contingencies.csv", contingency_csv(results));
    std::size_t islanding = 0;
    std::size_t violating = 0;
    std::size_t failed = 0;
    for (const auto& r : results) {
        islanding += r.islanding ? 1 : 0;
        violating += r.violations.empty() ? 0 : 1;
        failed += r.error ? 1 : 0;
    }
    write_summary(out,
                  {{"command", "nminus1"},
                   {"network", net.id()},
                   {"contingencies", results.size()},
                   {"islanding", islanding},
                   {"with_violations", violating},
                   {"errors", failed}},
                  elapsed);
    if (fail_on_violation && violating > 0) {
        err << violating << " contingencies cause violations\n";
        return kExitDomainFailure;
    }
    return kExitOk;
}

int cmd_cosim(const std::string& case_path, const std::vector<std::string>& feeder_paths, const std::string& tcp,
              int listen_port, double system_base, const fs::path& out, const Settings& s, std::uint64_t seed,
              std::ostream& err)
{
    if (feeder_paths.empty()) {
        throw UsageError("cosim needs at least one --feeder");
    }
    if (!tcp.empty() && listen_port >= 0) {
        throw UsageError("--tcp and --listen are mutually exclusive");
    }
    std::vector<FeederFile> feeders;
    for (const auto& p : feeder_paths) {
        feeders.push_back(load_feeder(p));
    }

    if (!tcp.empty()) {
        if (feeders.size() != 1) {
            throw UsageError("a --tcp participant serves exactly one --feeder");
        }
        std::pair<std::string, int> endpoint;
        try {
            endpoint = parse_endpoint(tcp);
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        double base = system_base;
        if (base <= 0.0) {
            base = case_path.empty() ? feeders[0].net.base_mva() : load_case(case_path, seed).base_mva();
        }
        const auto start = std::chrono::steady_clock::now();
        LocalFeeder local(feeders[0].net, feeders[0].head_bus, base, s.loadflow);
        auto connection = connect_to(endpoint.first, endpoint.second, std::chrono::seconds(10));
        const auto result = run_participant(connection, local, feeders[0].net.id());
        const double elapsed = seconds_since(start);
        write_file_atomic(out / "exchange_trace.csv", exchange_trace_csv(result.trace));
        write_file_atomic(out / ("feeder_" + safe_name(local.model().id()) + ".csv"),
                          loadflow_bus_csv(local.solved(), local.last_result()));
        write_summary(out,
                      {{"command", "cosim"},
                       {"role", "participant"},
                       {"network", local.model().id()},
                       {"converged", result.converged},
                       {"outer_iterations", result.rounds}},
                      elapsed);
        return result.converged ? kExitOk : kExitDomainFailure;
    }

    if (case_path.empty()) {
        throw UsageError("cosim needs a transmission case");
    }
    auto transmission = load_case(case_path, seed);
    const auto start = std::chrono::steady_clock::now();
    TndPowerflowResult result;
    if (listen_port >= 0) {
        std::vector<CoordinatorLink> links;
        for (const auto& f : feeders) {
            links.push_back({f.net.id(), f.parent_bus});
        }
        Listener listener("0.0.0.0", listen_port);
        err << "listening on port " << listener.port() << "\n";
        result = run_coordinator(listener, transmission, links, s.cosim);
    } else {
        for (auto& f : feeders) {
            attach_child(transmission, f.parent_bus, f.net, f.head_bus);
        }
        result = tnd_powerflow(transmission, s.cosim);
        for (std::size_t k = 0; k < transmission.children().size(); ++k) {
            const auto& child = *transmission.children()[k].child;
            write_file_atomic(out / ("feeder_" + safe_name(child.id()) + ".csv"),
                              loadflow_bus_csv(child, result.feeders[k]));
        }
    }
    const double elapsed = seconds_since(start);
    write_file_atomic(out / "buses.csv", loadflow_bus_csv(transmission, result.transmission));
    write_file_atomic(out / "exchange_trace.csv", exchange_trace_csv(result.trace));
    write_summary(out,
                  {{"command", "cosim"},
                   {"role", listen_port >= 0 ? "coordinator" : "in-process"},
                   {"network", transmission.id()},
                   {"feeders", feeders.size()},
                   {"converged", result.converged},
                   {"outer_iterations", result.outer_iterations},
                   {"max_boundary_change", result.max_boundary_change}},
                  elapsed);
    if (!result.converged) {
        err << "co-simulation did not converge in " << result.outer_iterations << " outer iterations\n";
        return kExitDomainFailure;
    }
    return kExitOk;
}

int cmd_dynsim(const std::string& case_path, const std::string& events_path, const fs::path& out, const Settings& s,
               std::uint64_t seed, std::ostream& err)
{
    auto net = load_case(case_path, seed);
    std::vector<DynEvent> events;
    if (!events_path.empty()) {
        require_input(events_path);
        try {
            events = parse_events(read_file(events_path));
        } catch (const Error& e) {
            throw UsageError("\"" + events_path + "\": " + e.what());
        }
    }
    const auto start = std::chrono::steady_clock::now();
    const auto lf = solve_newton_raphson(net, s.loadflow);
    if (!lf.converged) {
        err << "initial loadflow of \"" << net.id() << "\" did not converge\n";
        return kExitDomainFailure;
    }
    auto gens = generators_from_model(net);
    if (gens.empty()) {
        err << "network \"" << net.id() << "\" has no buses with machine data\n";
        return kExitDomainFailure;
    }
    const auto traj = run_dynamics(net, lf, std::move(gens), events, s.dyn);
    const double elapsed = seconds_since(start);
    write_file_atomic(out / "trajectory.csv", trajectory_csv(traj));
    write_file_atomic(out / "trajectory_manifest.json", trajectory_manifest(traj));
    json summary = {{"command", "dynsim"},
                    {"network", net.id()},
                    {"stable", traj.stable},
                    {"samples", traj.time.size()},
                    {"dt", s.dyn.dt},
                    {"t_end", s.dyn.t_end}};
    summary["instability_time"] = traj.instability_time ? json(*traj.instability_time) : json(nullptr);
    write_summary(out, summary, elapsed);
    return kExitOk;
}

int cmd_convert(const std::string& in, const std::string& out_path, std::uint64_t seed)
{
    const auto net = load_case(in, seed);
    const auto ext = extension_of(out_path);
    if (ext == ".cdf") {
        write_file_atomic(out_path, write_cdf(net));
    } else if (ext == ".json") {
        write_file_atomic(out_path, write_interchange(net));
    } else {
        throw UsageError("cannot infer the output format of \"" + out_path + "\" (expected .cdf or .json)");
    }
    return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Power-system simulation engine", "gridengine"};
    app.require_subcommand(1);

    std::string out_dir = "results";
    std::vector<std::string> overrides;
    std::uint64_t seed = 1;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
        cmd->add_option("--set", overrides, "Config override key=value (repeatable)");
        cmd->add_option("--seed", seed, "Seed for synthetic:<N> cases")->capture_default_str();
    };

    std::string case_path;
    auto* loadflow = app.add_subcommand("loadflow", "Newton-Raphson AC loadflow");
    loadflow->add_option("case", case_path, "Case file (.cdf, .json or synthetic:<N>)")->required();
    add_common(loadflow);

    int workers = 1;
    bool fail_on_violation = false;
    auto* nminus1 = app.add_subcommand("nminus1", "N-1 branch contingency screening");
    nminus1->add_option("case", case_path, "Case file")->required();
    nminus1->add_option("--workers", workers, "Worker threads")->capture_default_str();
    nminus1->add_flag("--fail-on-violation", fail_on_violation, "Exit 1 when any contingency causes a violation");
    add_common(nminus1);

    std::vector<std::string> feeders;
    std::string tcp;
    int listen_port = -1;
    double system_base = 0.0;
    auto* cosim = app.add_subcommand("cosim", "Transmission-distribution co-simulation");
    cosim->add_option("transmission", case_path, "Transmission case (optional for --tcp participants)");
    cosim->add_option("--feeder", feeders, "Feeder interchange file with aux parent_bus (repeatable)");
    cosim->add_option("--tcp", tcp, "Serve the feeder as a participant of host:port");
    cosim->add_option("--listen", listen_port, "Coordinate participants on this port");
    cosim->add_option("--system-base", system_base, "System MVA base for a participant without a case");
    add_common(cosim);

    std::string events_path;
    auto* dynsim = app.add_subcommand("dynsim", "Classical transient stability simulation");
    dynsim->add_option("case", case_path, "Case with machine data (Dynamics layer)")->required();
    dynsim->add_option("--events", events_path, "JSON list of events");
    add_common(dynsim);

    std::string convert_out;
    auto* convert = app.add_subcommand("convert", "Convert between .cdf and .json");
    convert->add_option("input", case_path, "Input file")->required();
    convert->add_option("output", convert_out, "Output file")->required();
    convert->add_option("--seed", seed, "Seed for synthetic:<N> inputs");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        const auto settings = make_settings(overrides);
        const fs::path dir(out_dir);
        if (loadflow->parsed()) {
            return cmd_loadflow(case_path, dir, settings, seed, err);
        }
        if (nminus1->parsed()) {
            return cmd_nminus1(case_path, dir, workers, fail_on_violation, seed, err);
        }
        if (cosim->parsed()) {
            return cmd_cosim(case_path, feeders, tcp, listen_port, system_base, dir, settings, seed, err);
        }
        if (dynsim->parsed()) {
            return cmd_dynsim(case_path, events_path, dir, settings, seed, err);
        }
        return cmd_convert(case_path, convert_out, seed);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return kExitDomainFailure;
    }
}

}  // namespace gridengine
