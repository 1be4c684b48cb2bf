#pragma once

namespace pdmp {

// Numerical knobs shared by the flow, operator, solver and simulation layers.
// A ModelSpec carries a copy as its defaults (overridable per call / via CLI).
struct SolverOptions {
    double delta = 1e-3;       // backward-integration step along flow lines
    double delta_quad = 1e-3;  // composite-trapezoid quadrature step
    double delta_flow = 1e-3;  // RK4 step for integrated flow families
    double t_cert = 50.0;      // horizon up to which t* = infinity is certified
    double eps_tail = 1e-6;    // target tail mass when truncating infinite horizons
    double tol = 1e-6;         // fixed-point tolerance for value iteration
    int max_iter = 100000;     // value-iteration iteration cap
    double rho_cap = 1e6;      // unbounded-growth guard for the vanishing sweep
    int threads = 1;           // data-parallel width (results independent of it)
};

} // namespace pdmp
