#include <catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "gridengine/cli.hpp"
#include "gridengine/interchange.hpp"
#include "gridengine/reports.hpp"
#include "gridengine/transport.hpp"
#include "support.hpp"

using namespace gridengine;
namespace fs = std::filesystem;

namespace {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("gridengine-cli-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string operator/(const std::string& name) const { return (path_ / name).string(); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_command(args, out, err);
    return {code, out.str(), err.str()};
}

std::size_t data_rows(const std::string& csv)
{
    std::size_t lines = 0;
    for (char c : csv) {
        lines += c == '\n' ? 1 : 0;
    }
    return lines - 1;  // header
}

/// Writes a feeder interchange file whose network aux names the parent bus.
std::string write_feeder(const TempDir& dir, NetworkModel feeder, const std::string& parent_bus)
{
    auto doc = nlohmann::json::parse(write_interchange(feeder));
    doc["network"]["aux"]["parent_bus"] = parent_bus;
    const auto path = dir / (feeder.id() + ".json");
    write_file_atomic(path, doc.dump(2));
    return path;
}

int free_port()
{
    Listener probe("127.0.0.1", 0);
    return probe.port();
}

}  // namespace

TEST_CASE("cli: loadflow writes per-bus and per-branch results")
{
    TempDir dir;
    const auto r = run({"loadflow", support::data_path("ieee14.cdf"), "--out", dir / "out"});
    REQUIRE(r.code == kExitOk);
    CHECK(data_rows(read_file(dir / "out/buses.csv")) == 14);
    CHECK(data_rows(read_file(dir / "out/branches.csv")) == 20);
    const auto summary = nlohmann::json::parse(read_file(dir / "out/summary.json"));
    CHECK(summary["converged"] == true);
    CHECK(fs::exists(dir.path() / "out/timing.json"));
}

TEST_CASE("cli: missing input and bad arguments are usage errors")
{
    TempDir dir;
    const auto missing = dir / "does-not-exist.cdf";
    const auto r = run({"loadflow", missing, "--out", dir / "out"});
    CHECK(r.code == kExitUsage);
    CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring(missing));
    CHECK_FALSE(fs::exists(dir.path() / "out/buses.csv"));

    CHECK(run({}).code == kExitUsage);
    CHECK(run({"frobnicate"}).code == kExitUsage);
    CHECK(run({"loadflow", support::data_path("ieee14.cdf"), "--set", "tolerance"}).code == kExitUsage);
    CHECK(run({"loadflow", support::data_path("ieee14.cdf"), "--set", "colour=blue"}).code == kExitUsage);
    CHECK(run({"loadflow", support::data_path("ieee14.cdf"), "--set", "tolerance=-1"}).code == kExitUsage);
    CHECK(run({"nminus1", support::data_path("ieee14.cdf"), "--workers", "0"}).code == kExitUsage);

    write_file_atomic(dir / "broken.json", "{ not json");
    const auto broken = run({"loadflow", dir / "broken.json", "--out", dir / "out"});
    CHECK(broken.code == kExitUsage);
    CHECK_THAT(broken.err, Catch::Matchers::ContainsSubstring("broken.json"));
}

TEST_CASE("cli: the installed binary reports exit codes")
{
    TempDir dir;
    const std::string cli = GRIDENGINE_CLI_PATH;
    const auto quiet = " > " + (dir / "log") + " 2>&1";
    auto status = [&](const std::string& args) {
        const int raw = std::system((cli + " " + args + quiet).c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    CHECK(status("loadflow " + support::data_path("ieee14.cdf") + " --out " + (dir / "ok")) == 0);
    CHECK(status("loadflow " + (dir / "missing.cdf")) == 2);
    CHECK(status("--help") == 0);
}

TEST_CASE("cli: a non-converging loadflow is a domain failure")
{
    TempDir dir;
    write_file_atomic(dir / "heavy.json", write_interchange(support::two_bus(0.1, 6.0)));
    const auto r = run({"loadflow", dir / "heavy.json", "--out", dir / "out", "--set", "max_iterations=10"});
    CHECK(r.code == kExitDomainFailure);
}

TEST_CASE("cli: convert round trips between CDF and interchange JSON")
{
    TempDir dir;
    REQUIRE(run({"convert", support::data_path("ieee30.cdf"), dir / "a.json"}).code == kExitOk);
    REQUIRE(run({"convert", dir / "a.json", dir / "b.cdf"}).code == kExitOk);
    REQUIRE(run({"convert", dir / "b.cdf", dir / "c.json"}).code == kExitOk);
    const auto a = parse_interchange(read_file(dir / "a.json"));
    const auto c = parse_interchange(read_file(dir / "c.json"));
    CHECK(model_fingerprint(a) == model_fingerprint(c));
    CHECK(run({"convert", support::data_path("ieee30.cdf"), dir / "x.txt"}).code == kExitUsage);
}

TEST_CASE("cli: outputs are byte-identical across runs and worker counts; inputs untouched")
{
    TempDir dir;
    const auto input = dir / "case.json";
    REQUIRE(run({"convert", support::data_path("ieee30.cdf"), input}).code == kExitOk);
    const auto before = read_file(input);

    REQUIRE(run({"loadflow", input, "--out", dir / "lf1"}).code == kExitOk);
    REQUIRE(run({"loadflow", input, "--out", dir / "lf2"}).code == kExitOk);
    for (const auto* file : {"buses.csv", "branches.csv", "summary.json"}) {
        CHECK(read_file(dir / (std::string("lf1/") + file)) == read_file(dir / (std::string("lf2/") + file)));
    }

    REQUIRE(run({"nminus1", input, "--workers", "1", "--out", dir / "n1"}).code == kExitOk);
    REQUIRE(run({"nminus1", input, "--workers", "4", "--out", dir / "n4"}).code == kExitOk);
    CHECK(read_file(dir / "n1/contingencies.csv") == read_file(dir / "n4/contingencies.csv"));
    CHECK(read_file(input) == before);
}

TEST_CASE("cli: nminus1 on a synthetic case and --fail-on-violation")
{
    TempDir dir;
    const auto ok = run({"nminus1", "synthetic:200", "--seed", "5", "--out", dir / "a"});
    REQUIRE(ok.code == kExitOk);
    const auto csv = read_file(dir / "a/contingencies.csv");
    CHECK(data_rows(csv) > 0);
    const auto strict = run({"nminus1", "synthetic:200", "--seed", "5", "--fail-on-violation", "--out", dir / "b"});
    CHECK(strict.code == kExitDomainFailure);
    CHECK(read_file(dir / "b/contingencies.csv") == csv);
}

TEST_CASE("cli: cosim in-process and over TCP produce identical traces")
{
    TempDir dir;
    const auto transmission = dir / "t.cdf";
    write_file_atomic(transmission, read_file(support::data_path("ieee14.cdf")));
    const auto f9 = write_feeder(dir, support::radial_feeder("F9", 3, 10.0, 0.3, 0.1), "9");
    const auto f14 = write_feeder(dir, support::radial_feeder("F14", 2, 5.0, 0.4, 0.15), "14");

    const auto local = run({"cosim", transmission, "--feeder", f9, "--feeder", f14, "--out", dir / "local"});
    INFO(local.err);
    REQUIRE(local.code == kExitOk);
    CHECK(fs::exists(dir.path() / "local/feeder_F9.csv"));
    CHECK(fs::exists(dir.path() / "local/feeder_F14.csv"));
    CHECK(data_rows(read_file(dir / "local/buses.csv")) == 14);

    const auto port = std::to_string(free_port());
    auto coordinator = std::async(std::launch::async, [&] {
        return run({"cosim", transmission, "--feeder", f9, "--feeder", f14, "--listen", port, "--out", dir / "coord"});
    });
    auto p9 = std::async(std::launch::async, [&] {
        return run({"cosim", "--feeder", f9, "--tcp", "127.0.0.1:" + port, "--system-base", "100", "--out", dir / "p9"});
    });
    auto p14 = std::async(std::launch::async, [&] {
        return run(
            {"cosim", "--feeder", f14, "--tcp", "127.0.0.1:" + port, "--system-base", "100", "--out", dir / "p14"});
    });
    const auto c = coordinator.get();
    const auto a = p9.get();
    const auto b = p14.get();
    REQUIRE(c.code == kExitOk);
    REQUIRE(a.code == kExitOk);
    REQUIRE(b.code == kExitOk);
    CHECK_THAT(c.err, Catch::Matchers::ContainsSubstring("listening on port " + port));
    CHECK(read_file(dir / "coord/exchange_trace.csv") == read_file(dir / "local/exchange_trace.csv"));
    CHECK(read_file(dir / "coord/buses.csv") == read_file(dir / "local/buses.csv"));
    CHECK(read_file(dir / "p9/feeder_F9.csv") == read_file(dir / "local/feeder_F9.csv"));
}

TEST_CASE("cli: cosim usage errors")
{
    TempDir dir;
    const auto f9 = write_feeder(dir, support::radial_feeder("F9", 3, 10.0, 0.3, 0.1), "9");
    CHECK(run({"cosim", support::data_path("ieee14.cdf"), "--out", dir / "o"}).code == kExitUsage);
    CHECK(run({"cosim", "--feeder", f9, "--out", dir / "o"}).code == kExitUsage);
    CHECK(run({"cosim", "--feeder", f9, "--tcp", "nonsense", "--out", dir / "o"}).code == kExitUsage);
    const auto orphan = write_feeder(dir, support::radial_feeder("F0", 1, 10.0, 0.1, 0.0), "no-such-bus");
    CHECK(run({"cosim", support::data_path("ieee14.cdf"), "--feeder", orphan, "--out", dir / "o"}).code != kExitOk);
}

TEST_CASE("cli: dynsim writes a trajectory and its manifest")
{
    TempDir dir;
    write_file_atomic(dir / "omib.json", write_interchange(support::omib(0.3, 0.2, 5.0, 1.0, 0.8)));
    write_file_atomic(dir / "events.json",
                      R"([{"time": 0.1, "kind": "ApplyBusFault", "target": "2"},
                          {"time": 0.2, "kind": "ClearBusFault", "target": "2"}])");
    const auto r = run({"dynsim", dir / "omib.json", "--events", dir / "events.json", "--set", "t_end=0.5", "--out",
                        dir / "out"});
    REQUIRE(r.code == kExitOk);
    const auto csv = read_file(dir / "out/trajectory.csv");
    CHECK(data_rows(csv) == 101);
    const auto manifest = nlohmann::json::parse(read_file(dir / "out/trajectory_manifest.json"));
    CHECK(manifest.is_object());

    write_file_atomic(dir / "bad-events.json", R"([{"time": 0.1, "kind": "Explode", "target": "2"}])");
    const auto bad = run({"dynsim", dir / "omib.json", "--events", dir / "bad-events.json", "--out", dir / "o2"});
    CHECK(bad.code == kExitUsage);
    CHECK_THAT(bad.err, Catch::Matchers::ContainsSubstring("kind"));

    // A loadflow-only case has no machines.
    REQUIRE(run({"convert", support::data_path("ieee14.cdf"), dir / "lf.json"}).code == kExitOk);
    CHECK(run({"dynsim", dir / "lf.json", "--out", dir / "o3"}).code == kExitDomainFailure);
}
