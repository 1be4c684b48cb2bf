#pragma once

// Internal per-node precomputation for the one-stage operator T_alpha.  The
// along-flow data (positions, rates, running costs, boundary/tail handling)
// is fixed for a given (model, grid, alpha); between value-iteration sweeps
// only the continuation field h changes, entering through the per-action
// kernel sums Qh and the tail evaluation.  Building the tables once per solve
// keeps the inner iteration purely arithmetic and bitwise deterministic.
//
// Single-action models use an affine shortcut: by linearity of the backward
// recursion, w(x) = A + B*Qh + C*h(tail) - D*rho with nonnegative A, B, C, D
// precomputed per node (D is the discretized calL_alpha).

#include <vector>

#include "pdmp/operators.hpp"

namespace pdmp::detail {

struct NodeDP {
    double x = 0.0;       // grid node (1-D)
    double t_end = 0.0;   // t*(x), or the truncation time when t* is infinite
    bool finite_star = false;
    long K = 0;           // number of backward steps (left endpoints 0..K-1)

    // General mode (>= 2 actions): per step k and action a, index k*A + a.
    std::vector<double> lam;          // lambda at the left endpoint
    std::vector<double> fcost;        // running cost at the left endpoint
    std::vector<unsigned char> feas;  // feasibility mask

    // Affine mode (single action): w = A + B*Qh + C*h(tail_x) - D*rho.
    bool affine = false;
    double A = 0.0, B = 0.0, C = 0.0, D = 0.0;

    // Boundary data when finite_star.
    double z = 0.0;                          // boundary coordinate
    std::vector<std::pair<int, double>> boundary_costs;  // (action, r(z,a))

    // Tail data when !finite_star.
    double tail_x = 0.0;     // phi(x, t_end)
    double eps_tail = 0.0;   // reported tail bound
};

struct BellmanTables {
    double alpha = 0.0;
    double delta = 0.0;
    std::vector<NodeDP> nodes;
};

BellmanTables build_bellman_tables(const ModelSpec& m, const Grid& grid,
                                   double alpha, const SolverOptions& opt);

// Prepared-node DP; `want_trace` additionally records the minimizing action
// path (used by the public one_stage_value).
OneStageOutput run_node_dp(const ModelSpec& m, const NodeDP& dp, double alpha,
                           double delta, double rho, const ValueField& h,
                           bool want_trace);

// T_alpha(rho, h) on the prepared grid; data-parallel over opt.threads with
// per-node output slots (bitwise independent of the thread count).
ValueField apply_bellman_tables(const ModelSpec& m, const Grid& grid,
                                const BellmanTables& tables, double rho,
                                const ValueField& h, const SolverOptions& opt);

// Box minimum of a scalar family (exact for the affine registry families).
double scalar_box_min(const ScalarFamily& f, const std::vector<double>& lo,
                      const std::vector<double>& hi);
double scalar_box_max(const ScalarFamily& f, const std::vector<double>& lo,
                      const std::vector<double>& hi);

// Kernel sum Qh(x, a); the registry kernels are state-independent, so the
// value depends on the action only.
double kernel_apply(const ModelSpec& m, const ValueField& h, int a);

} // namespace pdmp::detail
