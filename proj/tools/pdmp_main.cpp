// Command-line front end: config ingestion, solvers, simulator, verification.
//
// Exit codes: 0 success, 1 failed check, 2 numerical failure, 3 bad input.
// All randomness flows from --seed; CSV artifacts are byte-identical across
// reruns and --threads settings (timings appear only in the JSON summaries).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pdmp/report.hpp"

namespace fs = std::filesystem;

namespace {

// ACOI optimality gate shared by solve-average and verify.
constexpr double kAcoiTol = 1e-3;

struct RunConfig {
    std::string model;
    int grid = 0;  // 0 => per-command default
    double alpha = 0.0;
    std::string alpha_schedule;
    double x0 = std::numeric_limits<double>::quiet_NaN();
    double tol = 1e-6;
    double delta = 1e-3;
    std::uint64_t seed = 1;
    int reps = 8;
    double horizon = 0.0;  // 0 => per-command default
    std::string out = ".";
    int threads = 1;
};

pdmp::SolverOptions solver_options(const pdmp::ModelSpec& m, const RunConfig& cfg) {
    pdmp::SolverOptions opt = m.defaults;
    opt.tol = cfg.tol;
    opt.delta = cfg.delta;
    opt.threads = cfg.threads;
    return opt;
}

double default_x0(const pdmp::ModelSpec& m, const RunConfig& cfg) {
    if (std::isnan(cfg.x0)) return 0.5 * (m.lo[0] + m.hi[0]);
    return cfg.x0;
}

pdmp::ModelSpec load_model_checked(const std::string& path) {
    if (!fs::exists(path))
        throw std::invalid_argument("model file not found: " + path);
    return pdmp::load_model_file(path);
}

void write_file(const fs::path& dir, const std::string& name,
                const std::string& text) {
    fs::create_directories(dir);
    fs::path p = dir / name;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::invalid_argument("cannot write " + p.string());
    os << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::invalid_argument("missing artifact: " + p.string());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::vector<double> parse_schedule(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size())
            throw std::invalid_argument("malformed alpha schedule entry: " + tok);
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("alpha schedule is empty");
    return out;
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string sweep_trace_csv(const std::vector<pdmp::SweepPoint>& trace) {
    std::ostringstream os;
    os << "alpha,rho,h_sup,h_inf,iterations\n";
    for (const pdmp::SweepPoint& pt : trace)
        os << pdmp::fmt_g17(pt.alpha) << ',' << pdmp::fmt_g17(pt.rho) << ','
           << pdmp::fmt_g17(pt.h_sup) << ',' << pdmp::fmt_g17(pt.h_inf) << ','
           << pt.iterations << "\n";
    return os.str();
}

void print_records(const pdmp::ValidationReport& rep) {
    for (const pdmp::AssumptionRecord& r : rep.records) {
        std::cout << (r.pass ? "pass " : "FAIL ") << r.id << ": measured "
                  << r.measured << " against " << r.threshold;
        if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
        std::cout << "\n";
    }
}

// ---- validate ---------------------------------------------------------------

int cmd_validate(const RunConfig& cfg) {
    if (!fs::exists(cfg.model)) {
        std::cerr << "model file not found: " << cfg.model << "\n";
        return 3;
    }
    pdmp::ValidationReport rep;
    try {
        pdmp::ModelSpec m = pdmp::load_model_file(cfg.model);
        // Even node counts keep midpoint grids off the fixtures' kernel atoms,
        // where the self-exclusion audit would report a spurious collision.
        int n = cfg.grid > 0 ? cfg.grid : 40;
        double horizon = cfg.horizon > 0.0 ? cfg.horizon : 50.0;
        rep = pdmp::validate_assumptions(m, pdmp::make_midpoint_grid(m, n),
                                         horizon);
    } catch (const std::invalid_argument& e) {
        // Schema/primitive violations caught at load time become a failed
        // record so the report still names the broken invariant.
        pdmp::AssumptionRecord r;
        r.id = "model-load";
        r.pass = false;
        r.detail = e.what();
        rep.records.push_back(r);
    }
    write_file(cfg.out, "report.json", pdmp::validation_report_json(rep));
    print_records(rep);
    std::cout << (rep.all_pass() ? "validate: all checks passed\n"
                                 : "validate: checks failed\n");
    return rep.all_pass() ? 0 : 1;
}

// ---- solve-discounted -------------------------------------------------------

int cmd_solve_discounted(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    pdmp::ModelSpec m = load_model_checked(cfg.model);
    if (!(cfg.alpha > 0.0)) {
        std::cerr << "alpha must be positive; use solve-average\n";
        return 3;
    }
    pdmp::SolverOptions opt = solver_options(m, cfg);
    pdmp::Grid grid = pdmp::make_uniform_grid(m, cfg.grid > 0 ? cfg.grid : 201);

    pdmp::DiscountedSolution sol;
    try {
        sol = pdmp::value_iteration(m, grid, cfg.alpha, opt);
    } catch (const std::runtime_error& e) {
        std::cerr << "solve-discounted failed: " << e.what() << "\n";
        return 2;
    }

    std::ostringstream digest_in;
    digest_in << pdmp::emit_canonical(m) << "|discounted|alpha=" << cfg.alpha
              << "|grid=" << grid.size() << "|tol=" << opt.tol
              << "|delta=" << opt.delta;
    std::string digest = pdmp::fnv1a_hex(digest_in.str());

    write_file(cfg.out, "value.csv", sol.value.to_csv());
    write_file(cfg.out, "policy.csv", sol.policy.to_csv());
    write_file(cfg.out, "summary.json",
               pdmp::discounted_summary_json(sol, digest, elapsed_seconds(t0)));

    std::cout << "solve-discounted: converged in " << sol.iterations
              << " iterations on " << grid.size() << " nodes; residual up "
              << sol.residual_up << ", down " << sol.residual_down << "\n";
    return 0;
}

// ---- solve-average ----------------------------------------------------------

int cmd_solve_average(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    pdmp::ModelSpec m = load_model_checked(cfg.model);
    pdmp::SolverOptions opt = solver_options(m, cfg);
    pdmp::Grid grid = pdmp::make_uniform_grid(m, cfg.grid > 0 ? cfg.grid : 201);
    std::vector<double> schedule = cfg.alpha_schedule.empty()
                                       ? pdmp::default_alpha_schedule()
                                       : parse_schedule(cfg.alpha_schedule);
    double x0 = default_x0(m, cfg);
    double mc_horizon = cfg.horizon > 0.0 ? cfg.horizon : 200.0;

    pdmp::AverageSolution sol;
    try {
        sol = pdmp::vanishing_sweep(m, grid, x0, schedule, opt, cfg.seed,
                                    cfg.reps, mc_horizon);
    } catch (const std::runtime_error& e) {
        // Unbounded normalized values: the model misses the stability
        // assumptions the average-cost construction rests on.
        std::cerr << "solve-average failed [unbounded-sweep]: " << e.what()
                  << "\n";
        return 2;
    }
    pdmp::BoundednessReport bounds =
        pdmp::boundedness_report(sol.trace, sol.h_fields, opt.rho_cap);

    std::ostringstream digest_in;
    digest_in << pdmp::emit_canonical(m) << "|average|grid=" << grid.size()
              << "|x0=" << pdmp::fmt_g17(x0) << "|tol=" << opt.tol
              << "|delta=" << opt.delta << "|seed=" << cfg.seed
              << "|reps=" << cfg.reps << "|horizon=" << mc_horizon
              << "|schedule=";
    for (double a : schedule) digest_in << pdmp::fmt_g17(a) << ';';
    std::string digest = pdmp::fnv1a_hex(digest_in.str());

    write_file(cfg.out, "h.csv", sol.h.to_csv());
    write_file(cfg.out, "w.csv", sol.w.to_csv());
    write_file(cfg.out, "residual.csv", sol.residual.to_csv());
    write_file(cfg.out, "policy.csv", sol.policy.to_csv());
    write_file(cfg.out, "sweep.csv", sweep_trace_csv(sol.trace));
    write_file(cfg.out, "summary.json",
               pdmp::average_summary_json(sol, bounds, digest,
                                          elapsed_seconds(t0)));

    double res_max = *std::max_element(sol.residual.values().begin(),
                                       sol.residual.values().end());
    std::cout << "solve-average: rho = " << sol.rho << " at anchor " << x0
              << "; optimality residual max " << res_max << "\n";
    if (bounds.blow_up) {
        std::cerr << "solve-average failed [unbounded-sweep]: " << bounds.detail
                  << "\n";
        return 2;
    }
    if (!(res_max <= kAcoiTol)) {
        std::cerr << "optimality residual above " << kAcoiTol
                  << ": the sweep has not settled\n";
        return 1;
    }
    return 0;
}

// ---- simulate ---------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    pdmp::ModelSpec m = load_model_checked(cfg.model);
    pdmp::SolverOptions opt = solver_options(m, cfg);
    double x0 = default_x0(m, cfg);
    double horizon = cfg.horizon > 0.0 ? cfg.horizon : 100.0;

    // A policy.csv in the output directory (as written by the solve commands)
    // drives the run; otherwise the first action is applied throughout.
    pdmp::ControlStrategy strategy = pdmp::ControlStrategy::constant_action(0);
    std::string policy_note = "constant action 0";
    fs::path policy_path = fs::path(cfg.out) / "policy.csv";
    if (fs::exists(policy_path)) {
        strategy = pdmp::ControlStrategy::feedback_policy(
            pdmp::FeedbackPolicy::from_csv(read_file(policy_path)));
        policy_note = "feedback policy from " + policy_path.string();
    }

    pdmp::StatePoint start = pdmp::StatePoint::interior1(x0);
    pdmp::RngStream rng(cfg.seed, 0);
    pdmp::TrajectorySample traj =
        pdmp::sample_trajectory(m, start, strategy, horizon, rng, cfg.alpha,
                                1000000, opt);
    pdmp::McEstimate est =
        cfg.alpha > 0.0
            ? pdmp::mc_discounted_cost(m, start, strategy, cfg.alpha, cfg.reps,
                                       horizon, cfg.seed, opt)
            : pdmp::mc_average_cost(m, start, strategy, horizon, cfg.reps,
                                    cfg.seed, opt);

    std::ostringstream digest_in;
    digest_in << pdmp::emit_canonical(m) << "|simulate|" << policy_note
              << "|x0=" << pdmp::fmt_g17(x0) << "|alpha=" << cfg.alpha
              << "|horizon=" << horizon << "|reps=" << cfg.reps
              << "|seed=" << cfg.seed;
    std::string digest = pdmp::fnv1a_hex(digest_in.str());

    write_file(cfg.out, "trajectory.csv", traj.to_csv());
    write_file(cfg.out, "estimate.json",
               pdmp::estimate_summary_json(est, digest, elapsed_seconds(t0)));

    std::cout << "simulate: " << policy_note << "; mean " << est.mean
              << ", stderr " << est.stderr_ << ", " << traj.events.size()
              << " jumps in the sampled trajectory (pstar " << traj.pstar
              << ")\n";
    return 0;
}

// ---- verify -----------------------------------------------------------------

void push_check(pdmp::ValidationReport& rep, const std::string& id, bool pass,
                double measured, double threshold, const std::string& detail) {
    pdmp::AssumptionRecord r;
    r.id = id;
    r.pass = pass;
    r.measured = measured;
    r.threshold = threshold;
    r.detail = detail;
    rep.records.push_back(r);
}

int verify_average(const RunConfig& cfg, const pdmp::ModelSpec& m,
                   const nlohmann::json& summary) {
    pdmp::SolverOptions opt = solver_options(m, cfg);
    fs::path dir(cfg.out);
    double rho = summary.at("rho").get<double>();
    double x0 = summary.at("x0").get<double>();

    pdmp::ValueField h = pdmp::ValueField::from_csv(
        read_file(dir / "h.csv"), m.lo[0], m.hi[0]);
    pdmp::ValueField shipped = pdmp::ValueField::from_csv(
        read_file(dir / "residual.csv"), m.lo[0], m.hi[0]);
    pdmp::FeedbackPolicy policy =
        pdmp::FeedbackPolicy::from_csv(read_file(dir / "policy.csv"));

    pdmp::ValidationReport rep;
    bool shape = h.grid().size() == shipped.grid().size() &&
                 h.grid().size() ==
                     static_cast<int>(policy.interior_action.size()) &&
                 h.grid().size() == summary.at("grid_size").get<int>();
    push_check(rep, "artifact-shape", shape,
               static_cast<double>(h.grid().size()),
               summary.at("grid_size").get<double>(),
               "h, residual, policy and summary agree on the grid");

    double anchor = std::fabs(h.eval(x0));
    push_check(rep, "anchor-normalization", anchor <= 1e-9, anchor, 1e-9,
               "bias vanishes at the anchor");

    int status = 0;
    if (shape) {
        pdmp::ValueField recomputed =
            pdmp::optimality_residual(m, h.grid(), rho, h, opt);
        double res_max = *std::max_element(recomputed.values().begin(),
                                           recomputed.values().end());
        push_check(rep, "optimality-residual", res_max <= kAcoiTol, res_max,
                   kAcoiTol, "T(rho,h) - h stays below the optimality gate");

        double drift_sup = 0.0;
        for (int i = 0; i < h.grid().size(); ++i)
            drift_sup = std::max(
                drift_sup,
                std::fabs(recomputed.values()[i] - shipped.values()[i]));
        push_check(rep, "residual-consistency", drift_sup <= 1e-9, drift_sup,
                   1e-9,
                   "shipped residual.csv matches a recomputation from rho and h");

        double mc_horizon = cfg.horizon > 0.0 ? cfg.horizon : 200.0;
        pdmp::McEstimate mc = pdmp::mc_average_cost(
            m, pdmp::StatePoint::interior1(x0),
            pdmp::ControlStrategy::feedback_policy(policy), mc_horizon,
            cfg.reps, cfg.seed, opt);
        double gap = std::fabs(mc.mean - rho);
        double budget = 3.0 * mc.stderr_ + 1e-2;
        push_check(rep, "simulator-agreement", gap <= budget, gap, budget,
                   "long-run simulated cost under the shipped policy matches rho");
    } else {
        status = 1;
    }

    print_records(rep);
    write_file(cfg.out, "verify.json", pdmp::validation_report_json(rep));
    if (!rep.all_pass()) status = 1;
    std::cout << (status == 0 ? "verify: all checks passed\n"
                              : "verify: checks failed\n");
    return status;
}

int verify_discounted(const RunConfig& cfg, const pdmp::ModelSpec& m,
                      const nlohmann::json& summary) {
    pdmp::SolverOptions opt = solver_options(m, cfg);
    fs::path dir(cfg.out);
    double alpha = summary.at("alpha").get<double>();

    pdmp::ValueField value = pdmp::ValueField::from_csv(
        read_file(dir / "value.csv"), m.lo[0], m.hi[0]);
    pdmp::FeedbackPolicy policy =
        pdmp::FeedbackPolicy::from_csv(read_file(dir / "policy.csv"));

    pdmp::ValidationReport rep;
    auto [up, down] = pdmp::fixed_point_residual(m, value.grid(), alpha, value, opt);
    double resid = std::max(up, down);
    double gate = 10.0 * opt.tol;
    push_check(rep, "fixed-point-residual", resid <= gate, resid, gate,
               "shipped value field is a fixed point of its Bellman operator");

    double center = 0.5 * (m.lo[0] + m.hi[0]);
    double x0 = value.grid()[value.grid().nearest(center)];
    double horizon = cfg.horizon > 0.0
                         ? cfg.horizon
                         : pdmp::suggest_discounted_horizon(m, value.grid(),
                                                            alpha, 1e-6);
    pdmp::McEstimate mc = pdmp::mc_discounted_cost(
        m, pdmp::StatePoint::interior1(x0),
        pdmp::ControlStrategy::feedback_policy(policy), alpha, cfg.reps,
        horizon, cfg.seed, opt);
    double gap = std::fabs(mc.mean - value.eval(x0));
    double budget = 3.0 * mc.stderr_ + 1e-3 + mc.tail_bound + 2e-3;
    push_check(rep, "simulator-agreement", gap <= budget, gap, budget,
               "simulated discounted cost under the shipped policy matches J");

    print_records(rep);
    write_file(cfg.out, "verify.json", pdmp::validation_report_json(rep));
    std::cout << (rep.all_pass() ? "verify: all checks passed\n"
                                 : "verify: checks failed\n");
    return rep.all_pass() ? 0 : 1;
}

int cmd_verify(const RunConfig& cfg) {
    pdmp::ModelSpec m = load_model_checked(cfg.model);
    fs::path summary_path = fs::path(cfg.out) / "summary.json";
    nlohmann::json summary = nlohmann::json::parse(read_file(summary_path));
    std::string kind = summary.at("kind").get<std::string>();
    if (kind == "average") return verify_average(cfg, m, summary);
    if (kind == "discounted") return verify_discounted(cfg, m, summary);
    throw std::invalid_argument("unknown solution kind in summary: " + kind);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-control solver and simulator for piecewise "
                 "deterministic Markov processes"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_common = [&cfg](CLI::App* sub) {
        sub->add_option("--model", cfg.model, "model config file")->required();
        sub->add_option("--out", cfg.out, "artifact directory");
        sub->add_option("--threads", cfg.threads, "data-parallel width")
            ->check(CLI::PositiveNumber);
    };

    CLI::App* validate =
        app.add_subcommand("validate", "audit the standing assumptions");
    add_common(validate);
    validate->add_option("--grid", cfg.grid,
                         "midpoint audit nodes (default 40)");
    validate->add_option("--horizon", cfg.horizon,
                         "audit horizon (default 50)");

    CLI::App* disc = app.add_subcommand(
        "solve-discounted", "jump-indexed value iteration at fixed alpha");
    add_common(disc);
    disc->add_option("--grid", cfg.grid, "uniform grid nodes (default 201)");
    disc->add_option("--alpha", cfg.alpha, "discount rate (> 0)")->required();
    disc->add_option("--tol", cfg.tol, "fixed-point tolerance");
    disc->add_option("--delta", cfg.delta, "backward step along flow lines");

    CLI::App* avg = app.add_subcommand(
        "solve-average", "vanishing-discount long-run average solve");
    add_common(avg);
    avg->add_option("--grid", cfg.grid, "uniform grid nodes (default 201)");
    avg->add_option("--alpha-schedule", cfg.alpha_schedule,
                    "comma-separated decreasing discounts (default 0.5*2^-k, "
                    "k<=8)");
    avg->add_option("--x0", cfg.x0, "anchor state (default box center)");
    avg->add_option("--tol", cfg.tol, "fixed-point tolerance");
    avg->add_option("--delta", cfg.delta, "backward step along flow lines");
    avg->add_option("--seed", cfg.seed, "master seed for the MC cross-check");
    avg->add_option("--reps", cfg.reps, "MC cross-check replications");
    avg->add_option("--horizon", cfg.horizon,
                    "MC cross-check horizon (default 200)");

    CLI::App* sim = app.add_subcommand(
        "simulate", "sample trajectories and Monte Carlo cost estimates "
                    "(drives policy.csv from --out when present)");
    add_common(sim);
    sim->add_option("--x0", cfg.x0, "start state (default box center)");
    sim->add_option("--alpha", cfg.alpha,
                    "discount rate (0 => long-run average estimate)");
    sim->add_option("--horizon", cfg.horizon, "time horizon (default 100)");
    sim->add_option("--reps", cfg.reps, "replications");
    sim->add_option("--seed", cfg.seed, "master seed");
    sim->add_option("--delta", cfg.delta, "quadrature step");

    CLI::App* ver = app.add_subcommand(
        "verify", "recheck the solution artifacts in --out against the model");
    add_common(ver);
    ver->add_option("--tol", cfg.tol, "fixed-point tolerance");
    ver->add_option("--delta", cfg.delta, "backward step along flow lines");
    ver->add_option("--seed", cfg.seed, "master seed for the MC agreement");
    ver->add_option("--reps", cfg.reps, "MC agreement replications");
    ver->add_option("--horizon", cfg.horizon, "MC agreement horizon");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        if (app.got_subcommand(validate)) return cmd_validate(cfg);
        if (app.got_subcommand(disc)) return cmd_solve_discounted(cfg);
        if (app.got_subcommand(avg)) return cmd_solve_average(cfg);
        if (app.got_subcommand(sim)) return cmd_simulate(cfg);
        if (app.got_subcommand(ver)) return cmd_verify(cfg);
    } catch (const std::runtime_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "bad input: " << e.what() << "\n";
        return 3;
    }
    return 3;
}
