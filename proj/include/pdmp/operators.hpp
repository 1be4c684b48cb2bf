#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "pdmp/flow.hpp"
#include "pdmp/value_field.hpp"

namespace pdmp {

// Result of the along-flow one-stage minimization at a single state.
struct OneStageOutput {
    double value = 0.0;      // w(x)
    ControlPath trace;       // minimizing feedback path along the flow
    bool has_boundary = false;
    int boundary_action = 0;     // valid when has_boundary
    double boundary_value = 0.0; // min_a { r(z,a) + Qh(z,a) }
    double eps_tail = 0.0;       // reported tail bound when t* is infinite
};

// Embedded-chain operators along a fixed control path.
//   calL = int_0^{t*} e^{-alpha s - Lambda(s)} ds
//   L f  = int_0^{t*} e^{-alpha s - Lambda(s)} f(phi(x,s), a(s)) ds
//   H r  = e^{-alpha t* - Lambda(t*)} r(phi(x,t*), a_b)      (0 if t* = inf)
//   G h  = int e^{-alpha s - Lambda} lambda (sum_j w_j h(target_j)) ds
//          + e^{-alpha t* - Lambda(t*)} Qh(boundary, a_b)
// Infinite t* is truncated at T_tail with the tail bound
// eps_tail = e^{-int_0^{T_tail}(alpha+xi)} K_xi reported via *eps_tail.
// Throws std::runtime_error("divergent ...") when alpha + inf xi <= 0 with
// t* infinite.
double calL_alpha(const ModelSpec& m, const StatePoint& x, const ControlPath& path,
                  double alpha, const SolverOptions& opt = {},
                  double* eps_tail = nullptr);
double L_alpha_f(const ModelSpec& m, const StatePoint& x, const ControlPath& path,
                 double alpha, const SolverOptions& opt = {},
                 double* eps_tail = nullptr);
double H_alpha_r(const ModelSpec& m, const StatePoint& x, const ControlPath& path,
                 double alpha, const SolverOptions& opt = {});
double G_alpha_h(const ModelSpec& m, const StatePoint& x, const ControlPath& path,
                 double alpha, const ValueField& h, const SolverOptions& opt = {},
                 double* eps_tail = nullptr);

// Pointwise Hamiltonian minimization: min_a f(x,a) - lambda(x,a)(w_x - Qh(x,a)).
// Ties break to the lowest action index.
std::pair<int, double> hamiltonian_argmin(const ModelSpec& m, const StatePoint& x,
                                          double w_x, const ValueField& h);

// Boundary minimization: min_a r(z,a) + Qh(z,a); ties to the lowest index.
std::pair<int, double> boundary_argmin(const ModelSpec& m, const StatePoint& z,
                                       const ValueField& h);

// w(x) = T_alpha(rho, h)(x) by explicit backward Euler along the flow line
// from x: terminal value boundary_argmin at finite t* (h(phi(x,T_tail)) at
// infinite t*), then w(t) = (1-(alpha+lambda)delta) w(t+delta)
// + delta (f + lambda Qh - rho) with the action frozen per step at value
// hamiltonian_argmin against the downstream w(t+delta).
// Requires (alpha + lambda_max) delta <= 0.5 (throws std::runtime_error).
OneStageOutput one_stage_value(const ModelSpec& m, const StatePoint& x,
                               double alpha, double rho, const ValueField& h,
                               const SolverOptions& opt = {});

// T_alpha(rho, h) at every grid node (data-parallel over opt.threads; results
// bitwise independent of the schedule), plus boundary_argmin values at every
// reachable boundary point.
ValueField apply_bellman(const ModelSpec& m, const Grid& grid, double alpha,
                         double rho, const ValueField& h,
                         const SolverOptions& opt = {});

// Evaluates the Hamiltonian at x under n_samples random probability vectors
// over the feasible actions and returns (min over mixtures) - (vertex min).
// Linearity makes the gap >= 0 up to rounding (contract: >= -1e-12).
double relaxed_one_stage_check(const ModelSpec& m, const StatePoint& x,
                               double alpha, double rho, const ValueField& h,
                               int n_samples, std::uint64_t seed = 0x5eedULL,
                               const SolverOptions& opt = {});

// Residuals of the four semigroup-split identities at time t in (0, t*):
// each operator evaluated on [0, t*] must equal its [0, t] part plus the
// discounted shifted evaluation from phi(x, t).  Order: calL, L, H, G.
std::array<double, 4> decompose_check(const ModelSpec& m, const StatePoint& x,
                                      const ControlPath& path, double t,
                                      double alpha, const ValueField& h,
                                      const SolverOptions& opt = {});

} // namespace pdmp
