#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/discounted.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

// Control strategy driving a simulation: a stationary feedback policy
// (nearest-node lookup along the flow), an open-loop path table indexed by
// jump count (the last entry repeats), or the constant lowest-overhead form
// of the latter, a single action.
struct ControlStrategy {
    enum class Kind { feedback, open_loop };
    Kind kind = Kind::open_loop;
    FeedbackPolicy policy;                // feedback
    std::vector<ControlPath> path_table;  // open_loop: path for jump n
                                          // (clamped to the last entry)

    static ControlStrategy constant_action(int a) {
        ControlStrategy s;
        s.kind = Kind::open_loop;
        s.path_table = {ControlPath::constant(a)};
        return s;
    }
    static ControlStrategy feedback_policy(FeedbackPolicy p) {
        ControlStrategy s;
        s.kind = Kind::feedback;
        s.policy = std::move(p);
        return s;
    }
};

struct TrajectoryEvent {
    double time = 0.0;     // T_n
    StatePoint state;      // Z_n (post-jump location, interior)
    bool from_boundary = false;  // cause: boundary (true) or spontaneous
};

struct TrajectorySample {
    StatePoint start;                       // Z_0 = x0 (CSV row n = 0)
    std::vector<TrajectoryEvent> events;    // post-jump points Z_n, n >= 1
    double running_cost_integral = 0.0;     // int_0^horizon f dt (undiscounted)
    double boundary_cost_sum = 0.0;         // sum of r at boundary events
    long pstar = 0;                         // number of boundary hits
    bool truncated = false;                 // N_max exceeded
    // Discounted tallies accumulated during the same pass (alpha = 0 => equal
    // to the undiscounted ones).
    double discounted_running = 0.0;
    double discounted_boundary = 0.0;

    std::string to_csv() const;  // header "n,T,x,cause"
};

// First-jump law from x: draw u ~ U(0,1); boundary jump at t*(x) when
// Lambda(x, t*(x)) < -ln u, else the spontaneous time solving
// Lambda(x, t) = -ln u by bisection on the monotone hazard (tol 1e-10).
struct JumpDraw {
    double time = 0.0;
    bool boundary = false;
};
JumpDraw sample_jump_time(const ModelSpec& m, const StatePoint& x,
                          const ControlStrategy& strategy, RngStream& rng,
                          const SolverOptions& opt = {});
// Deterministic core used by tests: same, with the uniform draw injected.
JumpDraw jump_time_from_uniform(const ModelSpec& m, const StatePoint& x,
                                const ControlPath& path, double u,
                                const SolverOptions& opt = {});

// Simulates the controlled process on [0, horizon] per the standard PDMP
// construction (flow between jumps, spontaneous jumps from the hazard,
// forced jumps at the boundary, post-jump draw from the kernel atoms by
// inverse CDF in declaration order).  alpha discounts the parallel tallies.
TrajectorySample sample_trajectory(const ModelSpec& m, const StatePoint& x0,
                                   const ControlStrategy& strategy,
                                   double horizon, RngStream& rng,
                                   double alpha = 0.0, long n_max = 1000000,
                                   const SolverOptions& opt = {});

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    int n_rep = 0;
    std::uint64_t seed = 0;
    double horizon = 0.0;
    double tail_bound = 0.0;  // reported truncation bound (discounted runs)
};

// Monte Carlo estimators.  Replication i uses RngStream(seed, i); aggregation
// is pairwise with a fixed tree, so estimates are bitwise reproducible for
// any opt.threads.
McEstimate mc_discounted_cost(const ModelSpec& m, const StatePoint& x0,
                              const ControlStrategy& strategy, double alpha,
                              int n_rep, double horizon, std::uint64_t seed,
                              const SolverOptions& opt = {});
McEstimate mc_average_cost(const ModelSpec& m, const StatePoint& x0,
                           const ControlStrategy& strategy, double horizon,
                           int n_rep, std::uint64_t seed,
                           const SolverOptions& opt = {});
// Discounted cost accumulated up to the m_jumps-th jump time (0 for m = 0).
McEstimate mc_truncated_cost(const ModelSpec& m, const StatePoint& x0,
                             const ControlStrategy& strategy, double alpha,
                             int m_jumps, int n_rep, std::uint64_t seed,
                             const SolverOptions& opt = {});

// Horizon such that e^{-alpha H} * bound <= eps for the documented crude
// bound on remaining cost (sup f / alpha + boundary-rate surrogate).
double suggest_discounted_horizon(const ModelSpec& m, const Grid& grid,
                                  double alpha, double eps = 1e-4);

namespace detail {
// Piecewise-constant action path induced by a strategy on the flow line from
// z for the n-th inter-jump segment; feedback policies are quantized on the
// quadrature mesh (action per cell from the cell-midpoint state).
ControlPath strategy_path(const ModelSpec& m, const ControlStrategy& strategy,
                          long n, const StatePoint& z, double t_end,
                          const SolverOptions& opt);
}

} // namespace pdmp
