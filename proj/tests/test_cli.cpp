#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "pdmp/discounted.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string output;  // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
    std::string cmd = std::string(PDMP_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult res;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) res.output.append(buf, n);
    int status = pclose(pipe);
    res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::string fixture(const std::string& name) {
    return std::string(PDMP_FIXTURE_DIR) + "/" + name;
}

fs::path scratch(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "pdmp-cli-tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

} // namespace

TEST_CASE("validate command exit codes and report") {
    fs::path dir = scratch("validate");
    RunResult ok = run_cli("validate --model " + fixture("cycle1d.cfg") +
                           " --out " + (dir / "ok").string());
    CHECK(ok.code == 0);
    CHECK(contains(ok.output, "all checks passed"));
    CHECK(fs::exists(dir / "ok" / "report.json"));

    RunResult bad = run_cli("validate --model " + fixture("cycle1d-badkernel.cfg") +
                            " --out " + (dir / "bad").string());
    CHECK(bad.code == 1);
    CHECK(contains(bad.output, "kernel mass"));
    // The report is still written and names the broken invariant.
    auto rep = nlohmann::json::parse(slurp(dir / "bad" / "report.json"));
    CHECK_FALSE(rep.at("all_pass").get<bool>());
    CHECK(contains(rep.at("records")[0].at("detail").get<std::string>(),
                   "kernel mass"));

    RunResult missing = run_cli("validate --model " + fixture("missing.cfg"));
    CHECK(missing.code == 3);
    CHECK(contains(missing.output, "not found"));
}

TEST_CASE("malformed flags are bad input") {
    RunResult none = run_cli("");
    CHECK(none.code == 3);
    RunResult unknown = run_cli("solve-discounted --model x --frobnicate");
    CHECK(unknown.code == 3);
    RunResult nosub = run_cli("--model x");
    CHECK(nosub.code == 3);
}

TEST_CASE("solve-discounted writes artifacts matching the closed form") {
    fs::path dir = scratch("disc");
    RunResult run = run_cli("solve-discounted --model " +
                            fixture("cycle1d-a0.cfg") + " --alpha 1 --out " +
                            dir.string());
    REQUIRE(run.code == 0);
    CHECK(contains(run.output, "converged"));

    pdmp::ModelSpec m = pdmp::load_model_file(fixture("cycle1d-a0.cfg"));
    pdmp::ValueField value = pdmp::ValueField::from_csv(
        slurp(dir / "value.csv"), m.lo[0], m.hi[0]);
    CHECK(value.eval(0.5) ==
          doctest::Approx(oracle::cycle_anchor_value(1.0)).epsilon(1e-3));

    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("kind") == "discounted");
    CHECK(summary.at("alpha").get<double>() == 1.0);
    CHECK(summary.at("grid_size").get<int>() == 201);
    CHECK(summary.at("final_sup_delta").get<double>() <= 1e-6);
    CHECK(summary.at("elapsed_seconds").get<double>() >= 0.0);

    pdmp::FeedbackPolicy pol = pdmp::FeedbackPolicy::from_csv(
        slurp(dir / "policy.csv"));
    CHECK(static_cast<int>(pol.interior_action.size()) == 201);
}

TEST_CASE("solve-discounted on the decaying fixture matches its closed form") {
    fs::path dir = scratch("disc-decay");
    RunResult run = run_cli("solve-discounted --model " + fixture("decay1d.cfg") +
                            " --alpha 0.5 --grid 101 --out " + dir.string());
    REQUIRE(run.code == 0);
    pdmp::ModelSpec m = pdmp::load_model_file(fixture("decay1d.cfg"));
    pdmp::ValueField value = pdmp::ValueField::from_csv(
        slurp(dir / "value.csv"), m.lo[0], m.hi[0]);
    CHECK(value.eval(0.5) ==
          doctest::Approx(oracle::decay_anchor_value(0.5)).epsilon(1e-3));
    CHECK(value.eval(0.25) ==
          doctest::Approx(oracle::decay_value(0.5, 0.25)).epsilon(1e-3));
}

TEST_CASE("solve-discounted guards") {
    RunResult zero = run_cli("solve-discounted --model " +
                             fixture("cycle1d-a0.cfg") + " --alpha 0");
    CHECK(zero.code == 3);
    CHECK(contains(zero.output, "use solve-average"));

    fs::path dir = scratch("disc-blow");
    RunResult blow = run_cli("solve-discounted --model " +
                             fixture("cycle1d-blowup.cfg") +
                             " --alpha 0.5 --grid 51 --out " + dir.string());
    CHECK(blow.code == 2);
    CHECK(contains(blow.output, "unbounded"));
}

TEST_CASE("solve-average end to end with verify and simulate") {
    fs::path dir = scratch("avg");
    RunResult run = run_cli("solve-average --model " + fixture("cycle1d-a0.cfg") +
                            " --out " + dir.string());
    REQUIRE(run.code == 0);

    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("kind") == "average");
    double rho = summary.at("rho").get<double>();
    CHECK(std::fabs(rho - 2.0) <= 1e-2);
    CHECK(summary.at("trace").size() == 9);
    CHECK_FALSE(summary.at("bounds").at("blow_up").get<bool>());
    CHECK(summary.at("residual_max").get<double>() <= 1e-3);

    // sweep.csv carries one row per schedule point plus the header.
    std::istringstream sweep(slurp(dir / "sweep.csv"));
    std::string line;
    int rows = 0;
    REQUIRE(std::getline(sweep, line));
    CHECK(line == "alpha,rho,h_sup,h_inf,iterations");
    while (std::getline(sweep, line)) ++rows;
    CHECK(rows == 9);

    RunResult ver = run_cli("verify --model " + fixture("cycle1d-a0.cfg") +
                            " --out " + dir.string());
    CHECK(ver.code == 0);
    CHECK(contains(ver.output, "pass optimality-residual"));
    CHECK(contains(ver.output, "pass simulator-agreement"));

    RunResult sim = run_cli("simulate --model " + fixture("cycle1d-a0.cfg") +
                            " --out " + dir.string() +
                            " --horizon 100 --reps 4 --seed 11");
    CHECK(sim.code == 0);
    CHECK(contains(sim.output, "feedback policy"));
    CHECK(fs::exists(dir / "trajectory.csv"));
    auto est = nlohmann::json::parse(slurp(dir / "estimate.json"));
    CHECK(est.at("mean").get<double>() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(est.at("stderr").get<double>() == 0.0);

    // Tampering with the reported average must be caught by verify.
    summary["rho"] = rho + 1.0;
    std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
    RunResult tampered = run_cli("verify --model " + fixture("cycle1d-a0.cfg") +
                                 " --out " + dir.string());
    CHECK(tampered.code == 1);
    CHECK(contains(tampered.output, "FAIL residual-consistency"));
}

TEST_CASE("solve-average on the two-action cycle cannot beat the best action") {
    fs::path dir = scratch("avg-two");
    // Full default schedule (the optimality gate needs a small final alpha);
    // a coarser grid and step keep the multi-action sweep quick.
    RunResult run = run_cli("solve-average --model " + fixture("cycle1d.cfg") +
                            " --grid 51 --delta 0.002 --out " + dir.string());
    REQUIRE(run.code == 0);
    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    double rho = summary.at("rho").get<double>();
    CHECK(rho <= 2.0 + 1e-2);
    CHECK(rho >= 0.8);  // no policy can undercut the cheapest running cost
}

TEST_CASE("solve-average failure modes") {
    fs::path dir = scratch("avg-fail");
    RunResult blow = run_cli("solve-average --model " +
                             fixture("cycle1d-blowup.cfg") + " --grid 51 --out " +
                             dir.string());
    CHECK(blow.code == 2);
    CHECK(contains(blow.output, "unbounded-sweep"));

    RunResult badsched = run_cli("solve-average --model " +
                                 fixture("cycle1d-a0.cfg") +
                                 " --alpha-schedule 0.5,oops");
    CHECK(badsched.code == 3);

    RunResult rising = run_cli("solve-average --model " +
                               fixture("cycle1d-a0.cfg") +
                               " --alpha-schedule 0.25,0.5");
    CHECK(rising.code == 3);
    CHECK(contains(rising.output, "strictly decreasing"));
}

TEST_CASE("verify checks a discounted solution directory") {
    fs::path dir = scratch("verify-disc");
    RunResult run = run_cli("solve-discounted --model " +
                            fixture("cycle1d-a0.cfg") + " --alpha 1 --out " +
                            dir.string());
    REQUIRE(run.code == 0);
    RunResult ver = run_cli("verify --model " + fixture("cycle1d-a0.cfg") +
                            " --out " + dir.string());
    CHECK(ver.code == 0);
    CHECK(contains(ver.output, "pass fixed-point-residual"));
    CHECK(contains(ver.output, "pass simulator-agreement"));

    RunResult gone = run_cli("verify --model " + fixture("cycle1d-a0.cfg") +
                             " --out " + (dir / "nothing-here").string());
    CHECK(gone.code == 3);
}

TEST_CASE("artifacts are byte-identical across reruns and thread widths") {
    fs::path a = scratch("bytes-a"), b = scratch("bytes-b"), c = scratch("bytes-c");
    std::string base = "solve-average --model " + fixture("cycle1d-a0.cfg") +
                       " --grid 101 ";
    REQUIRE(run_cli(base + "--out " + a.string()).code == 0);
    REQUIRE(run_cli(base + "--out " + b.string()).code == 0);
    REQUIRE(run_cli(base + "--threads 4 --out " + c.string()).code == 0);
    for (const char* f :
         {"h.csv", "w.csv", "residual.csv", "policy.csv", "sweep.csv"}) {
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK(slurp(a / f) == slurp(c / f));
    }

    fs::path s1 = scratch("bytes-sim1"), s2 = scratch("bytes-sim2");
    std::string sim = "simulate --model " + fixture("cycle1d.cfg") +
                      " --horizon 50 --reps 16 --seed 77 ";
    REQUIRE(run_cli(sim + "--out " + s1.string()).code == 0);
    REQUIRE(run_cli(sim + "--threads 4 --out " + s2.string()).code == 0);
    CHECK(slurp(s1 / "trajectory.csv") == slurp(s2 / "trajectory.csv"));
    auto e1 = nlohmann::json::parse(slurp(s1 / "estimate.json"));
    auto e2 = nlohmann::json::parse(slurp(s2 / "estimate.json"));
    CHECK(e1.at("mean").get<double>() == e2.at("mean").get<double>());
    CHECK(e1.at("stderr").get<double>() == e2.at("stderr").get<double>());
}
