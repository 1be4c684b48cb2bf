#pragma once

#include "pdmp/simulate.hpp"

namespace pdmp {

// One vanishing-discount sweep point: the discounted solve at alpha_k and the
// derived normalized quantities rho_alpha = alpha J^alpha(x0),
// h_alpha = J^alpha - J^alpha(x0).
struct SweepPoint {
    double alpha = 0.0;
    double rho = 0.0;
    double h_sup = 0.0;
    double h_inf = 0.0;
    int iterations = 0;
};

struct AverageSolution {
    double rho = 0.0;
    double x0 = 0.0;
    ValueField h;         // bias, h(x0) = 0
    ValueField w;         // T(rho, h) at alpha = 0
    ValueField residual;  // w - h (ACOI direction: <= tol everywhere)
    FeedbackPolicy policy;
    std::vector<SweepPoint> trace;
    std::vector<ValueField> h_fields;  // one per sweep point (for the report)
    McEstimate mc_check;               // mc_average_cost under the policy
    double h_spread = 0.0;  // max_{k >= K/2} sup|h_k - h_K| (diagnostic)
};

// Default schedule alpha_k = 0.5 * 2^{-k}, k = 0..8.
std::vector<double> default_alpha_schedule();

// Vanishing-discount procedure: value_iteration per alpha_k, rho/h from the
// smallest alpha, w = apply_bellman(alpha=0, rho, h), policy from the
// pointwise selectors (interior Hamiltonian, boundary r + Qh), and a Monte
// Carlo average-cost cross-check under that policy.  Throws
// std::runtime_error on discounted-solve failure or unbounded rho growth.
AverageSolution vanishing_sweep(const ModelSpec& m, const Grid& grid, double x0,
                                const std::vector<double>& alpha_schedule,
                                const SolverOptions& opt = {},
                                std::uint64_t mc_seed = 1, int mc_reps = 8,
                                double mc_horizon = 200.0);

// Empirical boundedness audit of the sweep: C = max rho_k,
// K_h = -min_k inf h_k, b(x) = max_k h_k(x), plus a blow-up flag (monotone
// growth past rho_cap or runaway ratio).  Requires >= 2 sweep points.
struct BoundednessReport {
    double C = 0.0;
    double K_h = 0.0;
    std::vector<double> b;  // per grid node
    bool blow_up = false;
    std::string detail;
};
BoundednessReport boundedness_report(const std::vector<SweepPoint>& trace,
                                     const std::vector<ValueField>& h_fields,
                                     double rho_cap = 1e6);

// T(rho, h) - h per node (alpha = 0 one-stage operator).
ValueField optimality_residual(const ModelSpec& m, const Grid& grid, double rho,
                               const ValueField& h, const SolverOptions& opt = {});

// Monte Carlo estimates of E[h(X(t))]/t at increasing horizons under a
// policy; reports the trend (nothing is asserted — the condition is
// asymptotic).
struct DriftRow {
    double horizon = 0.0;
    double estimate = 0.0;
    double stderr_ = 0.0;
};
struct DriftReport {
    std::vector<DriftRow> rows;
    bool trend_vanishing = false;  // informational heuristic
};
DriftReport drift_condition_check(const ModelSpec& m, const ControlStrategy& policy,
                                  const ValueField& h,
                                  const std::vector<double>& horizons, int n_rep,
                                  std::uint64_t seed, const SolverOptions& opt = {});

} // namespace pdmp
