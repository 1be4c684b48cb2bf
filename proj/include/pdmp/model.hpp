#pragma once

#include <array>
#include <string>
#include <vector>

#include "pdmp/options.hpp"

namespace pdmp {

// Hard cap on the state dimension supported by the family registry.
inline constexpr int kMaxDim = 8;

// A point of the state space E (open box) or of its boundary.
struct StatePoint {
    enum class Location { interior, boundary };

    std::vector<double> coords;
    Location location = Location::interior;

    static StatePoint interior(std::vector<double> c) {
        return StatePoint{std::move(c), Location::interior};
    }
    static StatePoint boundary(std::vector<double> c) {
        return StatePoint{std::move(c), Location::boundary};
    }
    static StatePoint interior1(double x) { return interior({x}); }
    double x1() const { return coords.at(0); }
    bool is_boundary() const { return location == Location::boundary; }
};

// One atom of a finite-support transition kernel.  Targets are interior
// points; weights of one kernel sum to 1 (checked at load).
struct KernelAtom {
    StatePoint target;
    double weight = 0.0;
};

// Scalar function families over the state box: value(x) = base + slope.x.
// The closed registry keeps every evaluation exact and deterministic.
struct ScalarFamily {
    enum class Kind { constant, affine };
    Kind kind = Kind::constant;
    double base = 0.0;
    std::vector<double> slope;  // per axis; empty for constant

    double eval(const double* x, int dim) const {
        if (kind == Kind::constant) return base;
        double v = base;
        for (int i = 0; i < dim; ++i) v += slope[i] * x[i];
        return v;
    }
    double eval(const StatePoint& p) const {
        return eval(p.coords.data(), static_cast<int>(p.coords.size()));
    }
};

// Deterministic flow families.
//   linear:     phi_i(x,t) = x_i + velocity_i * t                (closed form)
//   exp_decay:  phi_i(x,t) = center_i + (x_i - center_i) e^{-kappa_i t}
//   affine_ode: dx_i/dt = a_i x_i + b_i, integrated by fixed-step RK4
struct FlowFamily {
    enum class Kind { linear, exp_decay, affine_ode };
    Kind kind = Kind::linear;
    std::vector<double> p0;  // velocity / center / a  (per axis)
    std::vector<double> p1;  // unused  / kappa  / b   (per axis)
};

// Feasibility predicates restricting the global action list per state.
struct Feasibility {
    enum class Kind { always, below, above };
    Kind kind = Kind::always;
    int axis = 0;
    double threshold = 0.0;

    bool admits(const double* x) const {
        switch (kind) {
            case Kind::always: return true;
            case Kind::below: return x[axis] < threshold;
            case Kind::above: return x[axis] > threshold;
        }
        return true;
    }
};

struct ActionSpec {
    std::string label;
    ScalarFamily rate;  // jump intensity lambda(x, a)
    Feasibility feasible;
};

struct CostSpec {
    ScalarFamily running;   // f(x, a), cost per unit time
    ScalarFamily boundary;  // r(z, a), lump cost at boundary jumps
};

// Finite-support kernel for one action; the shipped registry families
// (point_mass, uniform, atoms) are all state-independent.
struct KernelSpec {
    std::vector<KernelAtom> atoms;  // declaration order is the sampling order
};

// Fully-resolved, immutable model: the primitives (flow, lambda, Q) plus the
// running/boundary costs, the declared rate floor xi, and solver defaults.
struct ModelSpec {
    int dimension = 1;
    std::vector<double> lo, hi;  // open box (lo, hi) per axis
    std::string boundary_predicate = "box";
    FlowFamily flow;
    std::vector<ActionSpec> actions;
    std::vector<KernelSpec> kernels;  // one per action
    std::vector<CostSpec> costs;      // one per action
    ScalarFamily xi;                  // declared rate floor
    SolverOptions defaults;

    int action_count() const { return static_cast<int>(actions.size()); }
    bool inside_open_box(const double* x) const {
        for (int i = 0; i < dimension; ++i)
            if (!(x[i] > lo[i] && x[i] < hi[i])) return false;
        return true;
    }
    bool inside_closed_box(const double* x, double tol = 1e-9) const {
        for (int i = 0; i < dimension; ++i)
            if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
        return true;
    }
};

// 1-D solver grid: strictly increasing interior nodes.
struct Grid {
    std::vector<double> nodes;

    int size() const { return static_cast<int>(nodes.size()); }
    double operator[](int i) const { return nodes[i]; }
    // Index of the node nearest to x (ties to the lower index).
    int nearest(double x) const;
};

// n uniform interior nodes x_i = lo + i*(hi-lo)/(n+1), i = 1..n.
Grid make_uniform_grid(const ModelSpec& m, int n);
// n midpoint nodes x_i = lo + (i+1/2)*(hi-lo)/n, i = 0..n-1.  With even n this
// grid provably avoids the shipped fixtures' kernel targets.
Grid make_midpoint_grid(const ModelSpec& m, int n);

// One record of validate_assumptions: a named numeric check.
struct AssumptionRecord {
    std::string id;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionRecord> records;
    bool all_pass() const {
        for (const auto& r : records)
            if (!r.pass) return false;
        return true;
    }
    const AssumptionRecord* find(const std::string& id) const {
        for (const auto& r : records)
            if (r.id == id) return &r;
        return nullptr;
    }
};

// ---- operations -----------------------------------------------------------

// Parses the documented [domain]/[flow]/[actions.N]/[kernel]/[costs]/[xi]
// config schema.  Throws std::invalid_argument with line information on
// schema violations, unknown families, or kernel-mass errors.
ModelSpec load_model(const std::string& config_text);
ModelSpec load_model_file(const std::string& path);

// Canonical serialization; load_model(emit_canonical(m)) reproduces m.
std::string emit_canonical(const ModelSpec& m);

// Feasible actions at x in ascending index order (never empty).
std::vector<int> feasible_actions(const ModelSpec& m, const StatePoint& x);

double eval_rate(const ModelSpec& m, const StatePoint& x, int a);
double eval_running_cost(const ModelSpec& m, const StatePoint& x, int a);
double eval_boundary_cost(const ModelSpec& m, const StatePoint& z, int a);
std::vector<KernelAtom> kernel(const ModelSpec& m, const StatePoint& x, int a);

// Numeric audit of the standing assumptions at every grid node: rate floor
// margin, survival integral K_xi, discounted running-cost integrability,
// sup-rate integrability, kernel mass / self-atom exclusion, nonnegativity.
// Failures are reported, never thrown.
ValidationReport validate_assumptions(const ModelSpec& m, const Grid& grid,
                                      double horizon);

} // namespace pdmp
