#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "pdmp/operators.hpp"
#include "pdmp/rng.hpp"

using namespace pdmp;

namespace {

std::string fixture_path(const std::string& name) {
    return std::string(PDMP_FIXTURE_DIR) + "/" + name;
}

ModelSpec cycle() { return load_model_file(fixture_path("cycle1d.cfg")); }
ModelSpec cycle_a0() { return load_model_file(fixture_path("cycle1d-a0.cfg")); }
ModelSpec decay() { return load_model_file(fixture_path("decay1d.cfg")); }

ValueField const_h(const ModelSpec& m, double c, int n = 21) {
    return ValueField::constant(m, make_uniform_grid(m, n), c);
}

} // namespace

TEST_CASE("discounted time-to-jump mass calL") {
    ModelSpec cyc = cycle();
    StatePoint x = StatePoint::interior1(0.5);

    // Unit rate: int_0^0.5 e^{-s} ds.
    double v1 = calL_alpha(cyc, x, ControlPath::constant(1), 0.0);
    CHECK(v1 == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-6));

    // Zero rate: plain length of the ray.
    double v0 = calL_alpha(cyc, x, ControlPath::constant(0), 0.0);
    CHECK(v0 == doctest::Approx(0.5).epsilon(1e-12));

    // Infinite ray: int_0^inf e^{-s} ds truncated with a reported tail.
    ModelSpec dec = decay();
    double tail = -1.0;
    double vd = calL_alpha(dec, StatePoint::interior1(0.7),
                           ControlPath::constant(0), 0.0, {}, &tail);
    CHECK(tail > 0.0);
    CHECK(tail <= 2e-6);
    CHECK(vd == doctest::Approx(1.0).epsilon(1e-5));

    // alpha + xi floor == 0 on an unbounded ray cannot converge.
    ModelSpec free_decay = decay();
    free_decay.xi = ScalarFamily{};  // constant zero floor
    CHECK_THROWS_WITH_AS(calL_alpha(free_decay, StatePoint::interior1(0.5),
                                    ControlPath::constant(0), 0.0),
                         doctest::Contains("divergent"), std::runtime_error);
}

TEST_CASE("running, boundary, and jump operators on the cycle") {
    ModelSpec cyc = cycle();
    StatePoint x = StatePoint::interior1(0.5);
    ControlPath a0 = ControlPath::constant(0);
    ControlPath a1 = ControlPath::constant(1);

    CHECK(L_alpha_f(cyc, x, a0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(H_alpha_r(cyc, x, a0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));

    ValueField hc = const_h(cyc, 2.25);
    CHECK(G_alpha_h(cyc, x, a0, 0.0, hc) ==
          doctest::Approx(2.25).epsilon(1e-12));

    ValueField h0 = const_h(cyc, 0.0);
    CHECK(G_alpha_h(cyc, x, a1, 0.0, h0) == 0.0);
    CHECK(H_alpha_r(cyc, x, a1, 0.0) ==
          doctest::Approx(0.5 * std::exp(-0.5)).epsilon(1e-6));
}

TEST_CASE("jump operator on the decaying flow matches the closed form") {
    ModelSpec dec = decay();
    ValueField one = const_h(dec, 1.0);
    double tail = -1.0;
    double g = G_alpha_h(dec, StatePoint::interior1(0.5),
                         ControlPath::constant(0), 0.1, one, {}, &tail);
    CHECK(g == doctest::Approx(1.0 / 1.1).epsilon(1e-5));
    CHECK(tail <= 2e-6);

    // H vanishes on rays that never reach the boundary.
    CHECK(H_alpha_r(dec, StatePoint::interior1(0.5), ControlPath::constant(0),
                    0.1) == 0.0);
}

TEST_CASE("pointwise Hamiltonian minimization and tie-breaking") {
    ModelSpec cyc = cycle();
    StatePoint x = StatePoint::interior1(0.4);
    ValueField h0 = const_h(cyc, 0.0);

    // w - Qh = 0: objectives (1.0, 0.8).
    auto [a_lo, v_lo] = hamiltonian_argmin(cyc, x, 0.0, h0);
    CHECK(a_lo == 1);
    CHECK(v_lo == doctest::Approx(0.8).epsilon(1e-15));

    // w - Qh = -0.5: objectives (1.0, 1.3).
    ValueField h5 = const_h(cyc, 0.5);
    auto [a_hi, v_hi] = hamiltonian_argmin(cyc, x, 0.0, h5);
    CHECK(a_hi == 0);
    CHECK(v_hi == doctest::Approx(1.0).epsilon(1e-15));

    // Equal objectives: 1.0 = 0.8 - lambda (w - Qh) at w - Qh = -0.2.
    ValueField h2 = const_h(cyc, 0.2);
    auto [a_tie, v_tie] = hamiltonian_argmin(cyc, x, 0.0, h2);
    CHECK(a_tie == 0);
    CHECK(v_tie == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("boundary minimization and dominance") {
    ModelSpec cyc = cycle();
    StatePoint z = StatePoint::boundary({1.0});

    ValueField h0 = const_h(cyc, 0.0);
    auto [a0, v0] = boundary_argmin(cyc, z, h0);
    CHECK(a0 == 0);  // tie between equal lump costs goes to the lower index
    CHECK(v0 == 0.5);

    ValueField hc = const_h(cyc, 1.75);
    auto [a1, v1] = boundary_argmin(cyc, z, hc);
    CHECK(a1 == 0);
    CHECK(v1 == doctest::Approx(2.25).epsilon(1e-15));

    // Cheaper boundary lump on action 1 dominates.
    ModelSpec cheap = cyc;
    cheap.costs[1].boundary.base = 0.3;
    auto [a2, v2] = boundary_argmin(cheap, z, hc);
    CHECK(a2 == 1);
    CHECK(v2 == doctest::Approx(0.3 + 1.75).epsilon(1e-15));
}

TEST_CASE("one-stage value: renewal arithmetic and the fine-step comparator") {
    ModelSpec a0 = cycle_a0();
    StatePoint x = StatePoint::interior1(0.5);
    ValueField h0 = const_h(a0, 0.0);

    OneStageOutput full = one_stage_value(a0, x, 0.0, 0.0, h0);
    CHECK(full.value == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(full.has_boundary);
    CHECK(full.boundary_action == 0);
    CHECK(full.boundary_value == 0.5);

    OneStageOutput balanced = one_stage_value(a0, x, 0.0, 2.0, h0);
    CHECK(std::fabs(balanced.value) <= 1e-9);

    // Two actions, alpha = 0.5: compare against the independent fine-step
    // discretization with the same anchor h == 0.
    ModelSpec cyc = cycle();
    ValueField hz = const_h(cyc, 0.0);
    OneStageOutput two = one_stage_value(cyc, x, 0.5, 0.0, hz);
    oracle::TwoActionSolve ref = oracle::sweep_two_action_cycle(0.5, 0.0);
    CHECK(two.value == doctest::Approx(ref.value_at(0.5)).epsilon(1e-3));
    // With h == 0 a jump is a free exit, so the active action is the jumpy one.
    CHECK(two.trace.actions.back() == 1);
}

TEST_CASE("step-size guard rejects coarse meshes on fast rates") {
    ModelSpec cyc = cycle();
    SolverOptions coarse;
    coarse.delta = 0.6;  // (alpha + lambda_max) delta > 1/2
    ValueField h0 = const_h(cyc, 0.0);
    CHECK_THROWS_WITH_AS(
        one_stage_value(cyc, StatePoint::interior1(0.5), 1.0, 0.0, h0, coarse),
        doctest::Contains("step-size"), std::runtime_error);
}

TEST_CASE("grid application reproduces the per-node one-stage values") {
    ModelSpec a0 = cycle_a0();
    Grid grid = make_uniform_grid(a0, 41);
    ValueField h0 = ValueField::constant(a0, grid, 0.0);

    ValueField w = apply_bellman(a0, grid, 0.0, 0.0, h0);
    for (int i = 0; i < grid.size(); ++i)
        CHECK(w.values()[i] ==
              doctest::Approx((1.0 - grid[i]) + 0.5).epsilon(1e-9));

    ValueField w2 = apply_bellman(a0, grid, 0.0, 2.0, h0);
    for (int i = 0; i < grid.size(); ++i)
        CHECK(w2.values()[i] ==
              doctest::Approx(0.5 - (1.0 - grid[i])).epsilon(1e-7));
    CHECK(std::fabs(w2.eval(0.5)) <= 1e-9);

    // Boundary table carries the boundary minimization at the exit point.
    REQUIRE(w.boundary_values().size() == 1);
    CHECK(w.boundary_values()[0].first == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.boundary_values()[0].second == 0.5);
}

TEST_CASE("bitwise reproducibility across thread counts") {
    ModelSpec cyc = cycle();
    Grid grid = make_uniform_grid(cyc, 101);
    ValueField h = ValueField::constant(cyc, grid, 0.0);
    for (int i = 0; i < grid.size(); ++i)
        h.values()[i] = 0.3 * grid[i] * (1.0 - grid[i]);

    SolverOptions opt1;
    opt1.threads = 1;
    SolverOptions opt4;
    opt4.threads = 4;
    ValueField w1 = apply_bellman(cyc, grid, 0.5, 0.1, h, opt1);
    ValueField w4 = apply_bellman(cyc, grid, 0.5, 0.1, h, opt4);
    CHECK(w1.values() == w4.values());
    CHECK(w1.to_csv() == w4.to_csv());
}

TEST_CASE("relaxed mixtures never beat the best vertex") {
    ModelSpec cyc = cycle();
    ValueField h = const_h(cyc, 0.0);
    for (double x : {0.11, 0.5, 0.93}) {
        double gap = relaxed_one_stage_check(cyc, StatePoint::interior1(x), 0.5,
                                             0.0, h, 1000);
        CHECK(gap >= -1e-12);
    }

    // Uniform mixture over objectives (1.0, 0.8) sits 0.1 above the vertex.
    StatePoint x = StatePoint::interior1(0.4);
    double w_x = 0.0;
    double f_mix = 0.5 * eval_running_cost(cyc, x, 0) +
                   0.5 * eval_running_cost(cyc, x, 1);
    double lam_mix = 0.5 * eval_rate(cyc, x, 0) + 0.5 * eval_rate(cyc, x, 1);
    double qh_term = 0.0;  // h == 0
    double mix = f_mix - lam_mix * (w_x - qh_term);
    auto [best, vertex] = hamiltonian_argmin(cyc, x, w_x, h);
    CHECK(best == 1);
    CHECK(mix - vertex == doctest::Approx(0.1).epsilon(1e-12));

    // Point mass at the optimal vertex closes the gap exactly.
    double vertex_mix = eval_running_cost(cyc, x, 1) -
                        eval_rate(cyc, x, 1) * (w_x - qh_term);
    CHECK(vertex_mix - vertex == 0.0);
}

TEST_CASE("operator split at an interior time") {
    ModelSpec cyc = cycle();
    StatePoint x = StatePoint::interior1(0.3);
    ValueField h = const_h(cyc, 0.0);
    for (int i = 0; i < h.grid().size(); ++i)
        h.values()[i] = 0.25 + 0.5 * h.grid()[i];

    auto res = decompose_check(cyc, x, ControlPath::constant(1), 0.2, 0.0, h);
    for (double r : res) CHECK(std::fabs(r) <= 1e-9);

    // Zero-rate path: survival is exact, so the H identity is exact.
    auto res0 = decompose_check(cyc, x, ControlPath::constant(0), 0.2, 0.5, h);
    CHECK(res0[2] == 0.0);

    ValueField h0 = const_h(cyc, 0.0);
    auto resg = decompose_check(cyc, x, ControlPath::constant(1), 0.35, 0.25, h0);
    CHECK(std::fabs(resg[3]) <= 1e-9);
}

TEST_CASE("mass normalization identity across nodes, paths, discounts") {
    RngStream rng(7, 0);
    for (const char* name : {"cycle1d.cfg", "decay1d.cfg"}) {
        ModelSpec m = load_model_file(fixture_path(name));
        Grid grid = make_uniform_grid(m, 21);
        ValueField one = ValueField::constant(m, grid, 1.0);
        for (double alpha : {0.0, 0.5, 1.0}) {
            for (int i = 0; i < grid.size(); i += 4) {
                StatePoint x = StatePoint::interior1(grid[i]);
                ControlPath path = ControlPath::constant(0);
                if (m.action_count() > 1 && rng.next_double() < 0.5)
                    path = ControlPath{{0.0, 0.1 + 0.2 * rng.next_double()},
                                       {1, 0},
                                       0};
                double g1 = G_alpha_h(m, x, path, alpha, one);
                double cl = calL_alpha(m, x, path, alpha);
                CHECK(std::fabs(g1 + alpha * cl - 1.0) <= 5e-6);
            }
        }
    }
}

TEST_CASE("monotonicity of the jump and one-stage operators") {
    ModelSpec cyc = cycle();
    Grid grid = make_uniform_grid(cyc, 41);
    RngStream rng(11, 0);

    ValueField h1 = ValueField::constant(cyc, grid, 0.0);
    ValueField h2 = h1;
    for (int i = 0; i < grid.size(); ++i) {
        h1.values()[i] = rng.next_double();
        h2.values()[i] = h1.values()[i] + 0.3 * rng.next_double();
    }

    for (double x : {0.2, 0.5, 0.8}) {
        StatePoint p = StatePoint::interior1(x);
        CHECK(G_alpha_h(cyc, p, ControlPath::constant(1), 0.3, h1) <=
              G_alpha_h(cyc, p, ControlPath::constant(1), 0.3, h2));
    }
    ValueField w1 = apply_bellman(cyc, grid, 0.3, 0.0, h1);
    ValueField w2 = apply_bellman(cyc, grid, 0.3, 0.0, h2);
    int violations = 0;
    for (int i = 0; i < grid.size(); ++i)
        if (!(w1.values()[i] <= w2.values()[i])) ++violations;
    CHECK(violations == 0);
}

TEST_CASE("discounting weakens both the sojourn mass and the jump operator") {
    ModelSpec dec = decay();
    ValueField h = const_h(dec, 0.7);
    StatePoint x = StatePoint::interior1(0.6);
    ControlPath p = ControlPath::constant(0);
    CHECK(calL_alpha(dec, x, p, 0.1) >= calL_alpha(dec, x, p, 0.7));
    CHECK(G_alpha_h(dec, x, p, 0.1, h) >= G_alpha_h(dec, x, p, 0.7, h));

    ModelSpec cyc = cycle();
    ValueField hc = const_h(cyc, 0.7);
    StatePoint y = StatePoint::interior1(0.25);
    ControlPath q = ControlPath::constant(1);
    CHECK(calL_alpha(cyc, y, q, 0.0) >= calL_alpha(cyc, y, q, 1.0));
    CHECK(G_alpha_h(cyc, y, q, 0.0, hc) >= G_alpha_h(cyc, y, q, 1.0, hc));
}

TEST_CASE("explicit paths are never better than the optimized stage value") {
    ModelSpec cyc = cycle();
    StatePoint x = StatePoint::interior1(0.35);
    ValueField h = const_h(cyc, 0.0);
    for (int i = 0; i < h.grid().size(); ++i)
        h.values()[i] = 0.5 * h.grid()[i];

    double alpha = 0.5, rho = 0.1;
    OneStageOutput best = one_stage_value(cyc, x, alpha, rho, h);
    for (const ControlPath& path :
         {ControlPath::constant(0), ControlPath::constant(1),
          ControlPath{{0.0, 0.2}, {1, 0}, 0}, ControlPath{{0.0, 0.3}, {0, 1}, 1}}) {
        double on_path = -rho * calL_alpha(cyc, x, path, alpha) +
                         L_alpha_f(cyc, x, path, alpha) +
                         H_alpha_r(cyc, x, path, alpha) +
                         G_alpha_h(cyc, x, path, alpha, h);
        CHECK(best.value <= on_path + 2e-3);
    }
}

TEST_CASE("one-stage output is absolutely continuous along the flow") {
    ModelSpec a0 = cycle_a0();
    Grid grid = make_uniform_grid(a0, 101);
    ValueField h = ValueField::constant(a0, grid, 0.0);
    double alpha = 1.0, rho = 0.0;
    ValueField w = apply_bellman(a0, grid, alpha, rho, h);

    // Along the flow from x, w should satisfy
    //   w(x) = int_0^t [f - (alpha+lambda) w + lambda Qh + ... - rho] ds
    //          + w(phi(x,t))
    // up to O(delta) per unit time; reconstruct by composite trapezoid.
    double qh = h.eval(0.5);
    for (double x0 : {0.2, 0.5}) {
        for (double t : {0.1, 0.3}) {
            int steps = 200;
            double acc = 0.0;
            for (int k = 0; k < steps; ++k) {
                auto integrand = [&](double s) {
                    double xs = x0 + s;  // unit-speed flow
                    double lam = 0.0;    // single zero-rate action
                    double f = 1.0;
                    return f + lam * qh - (alpha + lam) * w.eval(xs) - rho;
                };
                double s0 = t * k / steps, s1 = t * (k + 1) / steps;
                acc += 0.5 * (s1 - s0) * (integrand(s0) + integrand(s1));
            }
            double rebuilt = acc + w.eval(x0 + t);
            CHECK(std::fabs(rebuilt - w.eval(x0)) <= 2e-3 * t + 2e-4);
        }
    }
}

TEST_CASE("value fields render and reload exactly") {
    ModelSpec cyc = cycle();
    Grid grid = make_uniform_grid(cyc, 17);
    ValueField v = ValueField::constant(cyc, grid, 0.0);
    RngStream rng(3, 1);
    for (int i = 0; i < grid.size(); ++i)
        v.values()[i] = 1e3 * (rng.next_double() - 0.5);
    v.set_boundary_value(1.0, 0.125);

    std::string csv = v.to_csv();
    ValueField back = ValueField::from_csv(csv, v.box_lo(), v.box_hi());
    CHECK(back.values() == v.values());
    CHECK(back.boundary_values() == v.boundary_values());
    CHECK(back.to_csv() == csv);

    CHECK_THROWS_AS(v.eval(1.5), std::domain_error);
    CHECK_THROWS_AS(v.boundary_value(0.0), std::domain_error);

    // Interpolation is a convex combination: never outside the node range.
    for (int i = 0; i + 1 < grid.size(); ++i) {
        double lo = std::min(v.values()[i], v.values()[i + 1]);
        double hi = std::max(v.values()[i], v.values()[i + 1]);
        for (double w01 : {0.25, 0.5, 0.75}) {
            double xx = grid[i] + w01 * (grid[i + 1] - grid[i]);
            double val = v.eval(xx);
            CHECK(val >= lo - 1e-12);
            CHECK(val <= hi + 1e-12);
        }
    }
}
