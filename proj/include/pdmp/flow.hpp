#pragma once

#include <vector>

#include "pdmp/model.hpp"

namespace pdmp {

// Boundary hitting time t*(x).  "infinite" is a certificate: the flow was
// shown (analytically, per family) not to reach the boundary, and the
// certificate horizon records the configured T_cert it extends beyond.
struct HitTime {
    bool finite = false;
    double t = 0.0;                 // valid when finite
    double certified_horizon = 0.0; // valid when infinite

    static HitTime at(double t) { return HitTime{true, t, 0.0}; }
    static HitTime never(double horizon) { return HitTime{false, 0.0, horizon}; }
};

// Piecewise-constant action schedule along one flow line, plus the action
// applied if/when the line reaches the boundary.  Segment k applies
// actions[k] on [breakpoints[k], breakpoints[k+1]) (last segment unbounded).
struct ControlPath {
    std::vector<double> breakpoints;  // strictly increasing, starts at 0
    std::vector<int> actions;         // one per segment
    int boundary_action = 0;

    static ControlPath constant(int a) { return ControlPath{{0.0}, {a}, a}; }

    int action_at(double s) const {
        int k = static_cast<int>(breakpoints.size()) - 1;
        while (k > 0 && s < breakpoints[k]) --k;
        return actions[k];
    }
    void validate() const;  // throws std::invalid_argument on malformed paths
};

// phi(x, t).  Closed-form families are exact; affine_ode marches fixed-step
// RK4 with step <= opt.delta_flow.  If t*(x) is finite, t in
// [t* - 1e-12, t* + 1e-9] yields the snapped boundary point and larger t
// throws std::domain_error.
StatePoint flow_at(const ModelSpec& m, const StatePoint& x, double t,
                   const SolverOptions& opt = {});

// t*(x) by bracketing + bisection to time tolerance 1e-10; infinite t* is
// certified up to opt.t_cert via the family's monotonicity argument.
HitTime hit_time(const ModelSpec& m, const StatePoint& x,
                 const SolverOptions& opt = {});

// Cumulative hazard Lambda(x, t) = int_0^t lambda(phi(x,s), path(s)) ds by
// composite trapezoid with step <= opt.delta_quad (exact on segments where
// the rate is affine in s, in particular constant-rate segments).
double hazard(const ModelSpec& m, const StatePoint& x, const ControlPath& path,
              double t, const SolverOptions& opt = {});

// Max over samples of |phi(x, t+s) - phi(phi(x,t), s)| (infinity norm).
struct SemigroupSample {
    StatePoint x;
    double t = 0.0, s = 0.0;
};
double check_semigroup(const ModelSpec& m,
                       const std::vector<SemigroupSample>& samples,
                       const SolverOptions& opt = {});

namespace detail {

// Forward-marching cursor along one flow line; positions are produced
// incrementally so that mesh sweeps cost O(1) per step for every family.
class FlowCursor {
  public:
    FlowCursor(const ModelSpec& m, const StatePoint& x, const SolverOptions& opt);
    // Advance to absolute time t >= current time.
    void advance_to(double t);
    const double* pos() const { return pos_.data(); }
    double time() const { return t_; }
    int dim() const { return dim_; }

  private:
    const ModelSpec* m_;
    SolverOptions opt_;
    int dim_;
    double t_ = 0.0;
    std::array<double, kMaxDim> x0_{};
    std::array<double, kMaxDim> pos_{};
};

// Raw flow evaluation into out[dim] without boundary bookkeeping.
void flow_position(const ModelSpec& m, const double* x0, double t,
                   const SolverOptions& opt, double* out);

} // namespace detail

} // namespace pdmp
