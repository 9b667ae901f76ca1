#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <doctest.h>

#include "qdae/cli/cli.hpp"
#include "qdae/error.hpp"

using namespace qdae;
using namespace qdae::cli;
namespace fs = std::filesystem;

namespace {

const std::string kTool = QDAE_TOOL;
const std::string kData = QDAE_TEST_DATA;

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("qdae-cli-" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int tool(const std::string& args) {
    const std::string cmd = kTool + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::size_t line_count(const std::string& path) {
    std::ifstream in(path);
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) ++n;
    return n;
}

RunConfig smib(const std::string& method) {
    RunConfig c;
    c.model = "smib";
    c.scenario = "normal";
    c.method = method;
    c.data_dir = kData;
    return c;
}

}  // namespace

TEST_CASE("trace files round trip") {
    TempDir tmp;
    classical::Trace tr;
    tr.names = {"a", "b"};
    tr.times = {0.0, 0.1, 0.2};
    tr.rows = {{1.0 / 3, -2e-300}, {std::acos(-1.0), 1e17}, {0.0, -0.0}};
    write_csv(tr, tmp / "t.csv");
    classical::Trace back = read_csv(tmp / "t.csv");
    CHECK(back.names == tr.names);
    CHECK(back.times == tr.times);
    CHECK(back.rows == tr.rows);

    spit(tmp / "bad.csv", "t,a\n0,1\n0.1,x\n");
    try {
        read_csv(tmp / "bad.csv");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    spit(tmp / "short.csv", "t,a,b\n0,1\n");
    CHECK_THROWS_AS(read_csv(tmp / "short.csv"), ParseError);
    CHECK_THROWS_AS(read_csv(tmp / "none.csv"), IoError);
    CHECK(manifest_path("out/x.csv") == "out/x.manifest.json");
    CHECK(default_output(smib("quantum")) == "smib-normal-quantum.csv");
}

TEST_CASE("runs are deterministic and self-describing") {
    TempDir tmp;
    RunResult a = run(smib("classical-euler")), b = run(smib("classical-euler"));
    write_csv(a.trace, tmp / "a.csv");
    write_csv(b.trace, tmp / "b.csv");
    CHECK(slurp(tmp / "a.csv") == slurp(tmp / "b.csv"));
    CHECK(a.trace.rows.size() == 2001);
    CHECK(a.manifest["rows"] == 2001);
    CHECK(a.manifest["complete"] == true);
    CHECK(a.manifest["dt"] == 0.01);
    CHECK(a.manifest["scenario_settings"]["params"]["K3"] == 1.7);
    CHECK_FALSE(a.constraint_residual);

    RunConfig q = smib("quantum");
    q.tmax = 0.2;
    RunResult qa = run(q), qb = run(q);
    CHECK(qa.trace.rows == qb.trace.rows);
    CHECK(qa.manifest["quantum"]["clock_qubits"] == 40);
    CHECK(qa.manifest["quantum"]["scale_eps"] == true);

    RunConfig bad = smib("leapfrog");
    CHECK_THROWS_AS(run(bad), ConfigError);
    bad = smib("classical-rk4");
    bad.scenario = "pole-slip-typo";
    CHECK_THROWS_AS(run(bad), IoError);
    bad = smib("classical-rk4");
    bad.scenario = "";
    CHECK_THROWS_AS(run(bad), ConfigError);
}

TEST_CASE("comparison") {
    RunResult e = run(smib("classical-euler")), r = run(smib("classical-rk4"));
    auto same = compare(e.trace, e.trace, {}, {});
    REQUIRE(same.size() == 2);
    for (const auto& c : same) CHECK(c.rmse == 0.0);
    auto rows = compare(e.trace, r.trace, {"delta"}, {{"delta", 1.0}});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].pass());
    CHECK(rows[0].rmse == doctest::Approx(classical::rmse(e.trace, r.trace, "delta")));
    auto strict = compare(e.trace, r.trace, {}, {{"*", 1e-12}});
    CHECK_FALSE(strict[0].pass());
    CHECK_FALSE(strict[1].pass());
    CHECK_THROWS_AS(compare(e.trace, r.trace, {"nothing"}, {}), ConfigError);
    RunConfig shorter = smib("classical-euler");
    shorter.tmax = 10;
    CHECK_THROWS_AS(compare(e.trace, run(shorter).trace, {}, {}), ConfigError);
    auto thr = default_thresholds("smib", "normal");
    CHECK(thr.at("delta") > 0);
    CHECK(default_thresholds("wscc-dae", "small").empty());
}

TEST_CASE("reduction listing") {
    TempDir tmp;
    spit(tmp / "toy.dae", "param p = 1\nstate x = 1\nalg y = 0\neq der(x) = y\neq 0 = x - p\n");
    CHECK(tool("reduce --model " + tmp / "toy.dae" + " --out " + tmp / "toy.txt") == 0);
    const std::string text = slurp(tmp / "toy.txt");
    CHECK(text.find("# derived from constraint 0, order 1") != std::string::npos);
    CHECK(text.find("explicit ODE: 2 variables") != std::string::npos);
    CHECK(tool("reduce --model wscc-dae --data-dir " + kData + " --out " + tmp / "w.txt") == 0);
    CHECK(slurp(tmp / "w.txt").find("explicit ODE: 51 variables") != std::string::npos);
    CHECK(tool("reduce --model smib") == 1);

    spit(tmp / "sing.dae", "state x = 1\nalg y = 0\nalg w = 0\neq der(x) = y\neq 0 = x\neq 0 = x + 1\n");
    CHECK(tool("reduce --model " + tmp / "sing.dae") == 2);
}

TEST_CASE("exit codes of the tool") {
    TempDir tmp;
    const std::string data = " --data-dir " + kData;
    const std::string e = tmp / "e.csv", r = tmp / "r.csv";
    CHECK(tool("run --model smib --scenario normal --out " + e + data) == 0);
    CHECK(line_count(e) == 2002);
    CHECK(fs::exists(tmp / "e.manifest.json"));
    CHECK(tool("run --model smib --scenario normal --method classical-rk4 --out " + r + data) == 0);

    CHECK(tool("compare " + e + " " + e + " --out " + tmp / "rep.csv") == 0);
    // Defaults come from the first manifest; Euler and RK4 differ by more than they allow.
    CHECK(tool("compare " + e + " " + r) == 4);
    CHECK(slurp(tmp / "rep.csv").rfind("variable,rmse,threshold,pass\n", 0) == 0);
    CHECK(tool("compare " + e + " " + r + " --threshold 1e-12") == 4);
    CHECK(tool("compare " + e + " " + r + " --threshold delta=1 --threshold w=1") == 0);
    CHECK(tool("compare " + e + " " + r + " --threshold bogus") == 1);
    CHECK(tool("compare " + e + " " + tmp / "missing.csv") == 3);
    const std::string s = tmp / "s.csv";
    CHECK(tool("run --model smib --scenario normal --tmax 5 --out " + s + data) == 0);
    CHECK(tool("compare " + e + " " + s) == 2);

    CHECK(tool("run --model smib --scenario normal --method leapfrog" + data) == 1);
    CHECK(tool("run --model smib --scenario nowhere --out " + tmp / "x.csv" + data) == 3);
    CHECK(tool("run --model smib --scenario normal --eps 0.5" + data) == 1);
    CHECK(tool("frobnicate") == 1);

    // A diverging model keeps its partial trace and reports a numeric failure.
    spit(tmp / "blow.dae", "state x = 10\neq der(x) = x^3\n");
    const std::string b = tmp / "b.csv";
    CHECK(tool("run --model " + tmp / "blow.dae" + " --dt 1 --tmax 10 --out " + b) == 2);
    CHECK(line_count(b) >= 2);
    CHECK(slurp(tmp / "b.manifest.json").find("\"complete\": false") != std::string::npos);
}
