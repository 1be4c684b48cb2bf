#pragma once

#include <string>
#include <vector>

#include "pdmp/operators.hpp"

namespace pdmp {

// Stationary feedback policy on a grid: one action per interior node
// (nearest-node lookup => piecewise-constant policy) and one action per
// reachable boundary point.
struct FeedbackPolicy {
    Grid grid;
    std::vector<int> interior_action;
    std::vector<std::pair<double, int>> boundary_action;  // (coordinate, action)

    int lookup(double x) const { return interior_action[grid.nearest(x)]; }
    // Nearest stored boundary point (they are few and isolated).
    int lookup_boundary(double z) const;

    // CSV round trip: header "kind,x,action".
    std::string to_csv() const;
    static FeedbackPolicy from_csv(const std::string& text);
};

struct DiscountedSolution {
    double alpha = 0.0;
    ValueField value;  // J^alpha on the grid
    FeedbackPolicy policy;
    int iterations = 0;
    std::vector<double> sup_deltas;   // per-iteration sup |v_{m+1} - v_m|
    double residual_up = 0.0;         // sup (W J - J)
    double residual_down = 0.0;       // sup (J - W J)
};

// Jump-indexed value iteration v_0 = 0, v_{m+1} = apply_bellman(alpha, 0, v_m).
// Stops when the sup-delta and the fixed-point residual are both <= opt.tol.
// Iterates must be pointwise nondecreasing (violations beyond 1e-10 throw —
// they signal a quadrature/step-size bug).  Throws std::runtime_error when
// opt.max_iter is exhausted or when alpha*v_m exceeds opt.rho_cap (divergence
// guard used by the vanishing sweep).
DiscountedSolution value_iteration(const ModelSpec& m, const Grid& grid,
                                   double alpha, const SolverOptions& opt = {});

// Feedback selector at a fixed point: interior hamiltonian_argmin(node,
// J(node), J), boundary boundary_argmin(z, J).
FeedbackPolicy extract_policy(const ModelSpec& m, const Grid& grid,
                              const ValueField& J, const SolverOptions& opt = {});

// (sup(W J - J), sup(J - W J)) over nodes; the second certifies J as an
// upper bound when it is <= 0.
std::pair<double, double> fixed_point_residual(const ModelSpec& m, const Grid& grid,
                                               double alpha, const ValueField& J,
                                               const SolverOptions& opt = {});

} // namespace pdmp
