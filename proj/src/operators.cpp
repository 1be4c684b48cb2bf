#include "pdmp/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "bellman_core.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

namespace detail {

double scalar_box_min(const ScalarFamily& f, const std::vector<double>& lo,
                      const std::vector<double>& hi) {
    if (f.kind == ScalarFamily::Kind::constant) return f.base;
    double v = f.base;
    for (std::size_t i = 0; i < lo.size(); ++i)
        v += std::min(f.slope[i] * lo[i], f.slope[i] * hi[i]);
    return v;
}

double scalar_box_max(const ScalarFamily& f, const std::vector<double>& lo,
                      const std::vector<double>& hi) {
    if (f.kind == ScalarFamily::Kind::constant) return f.base;
    double v = f.base;
    for (std::size_t i = 0; i < lo.size(); ++i)
        v += std::max(f.slope[i] * lo[i], f.slope[i] * hi[i]);
    return v;
}

double kernel_apply(const ModelSpec& m, const ValueField& h, int a) {
    double q = 0.0;
    for (const KernelAtom& atom : m.kernels[a].atoms)
        q += atom.weight * h.eval(atom.target.x1());
    return q;
}

} // namespace detail

namespace {

void require_1d(const ModelSpec& m) {
    if (m.dimension != 1)
        throw std::invalid_argument("the solver layer supports 1-D models only");
}

// Truncation time for integrals over an unbounded flow line: the survival
// weight is certified below eps once (alpha + inf xi) t >= ln(1/eps).
double tail_stop_time(const ModelSpec& m, double alpha, const SolverOptions& opt) {
    double denom = alpha + detail::scalar_box_min(m.xi, m.lo, m.hi);
    if (denom <= 0.0) return opt.t_cert;
    return std::min(opt.t_cert, std::log(1.0 / opt.eps_tail) / denom);
}

double tail_bound_report(const ModelSpec& m, double alpha, double t_stop,
                         const SolverOptions& opt) {
    double denom = alpha + detail::scalar_box_min(m.xi, m.lo, m.hi);
    double k_est = (denom > 0.0) ? 1.0 / denom : opt.t_cert;
    return std::exp(-std::max(denom, 0.0) * t_stop) * k_est;
}

// Composite-trapezoid integration of the three path functionals
//   calL = int e^{-alpha s - Lambda} ds
//   Lf   = int e^{-alpha s - Lambda} f ds
//   Gin  = int e^{-alpha s - Lambda} lambda Qh ds
// along the flow from x under `path`, up to t* (or the tail truncation), or
// up to `cap` when 0 <= cap.  The mesh splits at control breakpoints and is
// uniform with step <= delta_quad inside each segment.
struct PathQuad {
    double calL = 0.0, Lf = 0.0, Gin = 0.0;
    double weight_end = 1.0;  // e^{-alpha t_end - Lambda(t_end)}
    double t_end = 0.0;
    bool reached_boundary = false;
    StatePoint z;            // boundary point, when reached
    double eps_tail = 0.0;   // reported when t* is infinite and uncapped
    bool infinite_star = false;
};

PathQuad integrate_path(const ModelSpec& m, const StatePoint& x,
                        const ControlPath& path, double alpha,
                        const ValueField* h, double cap,
                        const SolverOptions& opt) {
    require_1d(m);
    path.validate();
    if (alpha < 0.0) throw std::domain_error("alpha must be nonnegative");
    for (int a : path.actions)
        if (a >= m.action_count())
            throw std::invalid_argument("control path action index out of range");

    PathQuad out;
    HitTime ht = hit_time(m, x, opt);
    double horizon;
    if (ht.finite) {
        horizon = ht.t;
        out.reached_boundary = (cap < 0.0 || cap >= ht.t);
        if (out.reached_boundary)
            out.z = flow_at(m, x, ht.t, opt);
        else
            horizon = cap;
    } else {
        out.infinite_star = true;
        double t_stop = tail_stop_time(m, alpha, opt);
        horizon = (cap >= 0.0) ? std::min(cap, t_stop) : t_stop;
        if (cap < 0.0) out.eps_tail = tail_bound_report(m, alpha, t_stop, opt);
    }
    out.t_end = horizon;

    std::vector<double> qvals(m.action_count(), 0.0);
    if (h)
        for (int a = 0; a < m.action_count(); ++a)
            qvals[a] = detail::kernel_apply(m, *h, a);

    std::vector<double> cuts{0.0};
    for (double b : path.breakpoints)
        if (b > 0.0 && b < horizon) cuts.push_back(b);
    cuts.push_back(horizon);
    std::sort(cuts.begin(), cuts.end());

    detail::FlowCursor cur(m, x, opt);
    double Lam = 0.0;

    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        double s0 = cuts[seg], s1 = cuts[seg + 1];
        int a = path.action_at(s0);
        const ActionSpec& act = m.actions[a];
        const ScalarFamily& fam_f = m.costs[a].running;
        long K = std::max<long>(
            1, static_cast<long>(std::ceil((s1 - s0) / opt.delta_quad - 1e-12)));
        cur.advance_to(s0);
        if (!act.feasible.admits(cur.pos()))
            throw std::domain_error("control path action infeasible along the flow");
        double lam_prev = act.rate.eval(cur.pos(), m.dimension);
        double w_prev = std::exp(-alpha * s0 - Lam);
        double f_prev = fam_f.eval(cur.pos(), m.dimension);
        for (long k = 1; k <= K; ++k) {
            double s = (k == K) ? s1
                                : s0 + (s1 - s0) * static_cast<double>(k) /
                                           static_cast<double>(K);
            double dt = s - cur.time();
            cur.advance_to(s);
            if (!act.feasible.admits(cur.pos()))
                throw std::domain_error(
                    "control path action infeasible along the flow");
            double lam = act.rate.eval(cur.pos(), m.dimension);
            double f = fam_f.eval(cur.pos(), m.dimension);
            Lam += 0.5 * dt * (lam_prev + lam);
            double w = std::exp(-alpha * s - Lam);
            out.calL += 0.5 * dt * (w_prev + w);
            out.Lf += 0.5 * dt * (w_prev * f_prev + w * f);
            if (h)
                out.Gin += 0.5 * dt * (w_prev * lam_prev + w * lam) * qvals[a];
            lam_prev = lam;
            w_prev = w;
            f_prev = f;
        }
    }
    out.weight_end = std::exp(-alpha * horizon - Lam);
    return out;
}

void require_convergent(const PathQuad& q, const ModelSpec& m, double alpha) {
    if (q.infinite_star &&
        alpha + detail::scalar_box_min(m.xi, m.lo, m.hi) <= 0.0)
        throw std::runtime_error(
            "divergent: alpha + xi floor vanishes on an unbounded flow line");
}

} // namespace

double calL_alpha(const ModelSpec& m, const StatePoint& x, const ControlPath& path,
                  double alpha, const SolverOptions& opt, double* eps_tail) {
    PathQuad q = integrate_path(m, x, path, alpha, nullptr, -1.0, opt);
    require_convergent(q, m, alpha);
    if (eps_tail) *eps_tail = q.eps_tail;
    return q.calL;
}

double L_alpha_f(const ModelSpec& m, const StatePoint& x, const ControlPath& path,
                 double alpha, const SolverOptions& opt, double* eps_tail) {
    PathQuad q = integrate_path(m, x, path, alpha, nullptr, -1.0, opt);
    require_convergent(q, m, alpha);
    if (eps_tail) *eps_tail = q.eps_tail;
    return q.Lf;
}

double H_alpha_r(const ModelSpec& m, const StatePoint& x, const ControlPath& path,
                 double alpha, const SolverOptions& opt) {
    HitTime ht = hit_time(m, x, opt);
    if (!ht.finite) return 0.0;  // no boundary hit, no lump cost
    if (path.boundary_action < 0)
        throw std::domain_error("path carries no boundary action");
    PathQuad q = integrate_path(m, x, path, alpha, nullptr, -1.0, opt);
    double r = eval_boundary_cost(m, q.z, path.boundary_action);
    return q.weight_end * r;
}

double G_alpha_h(const ModelSpec& m, const StatePoint& x, const ControlPath& path,
                 double alpha, const ValueField& h, const SolverOptions& opt,
                 double* eps_tail) {
    PathQuad q = integrate_path(m, x, path, alpha, &h, -1.0, opt);
    if (eps_tail) *eps_tail = q.eps_tail;
    if (!q.reached_boundary) return q.Gin;
    if (path.boundary_action < 0)
        throw std::domain_error("path carries no boundary action");
    if (!m.actions[path.boundary_action].feasible.admits(q.z.coords.data()))
        throw std::domain_error("boundary action infeasible at the exit point");
    return q.Gin + q.weight_end * detail::kernel_apply(m, h, path.boundary_action);
}

std::pair<int, double> hamiltonian_argmin(const ModelSpec& m, const StatePoint& x,
                                          double w_x, const ValueField& h) {
    int best = -1;
    double best_val = std::numeric_limits<double>::infinity();
    for (int a : feasible_actions(m, x)) {
        double lam = m.actions[a].rate.eval(x);
        double q = detail::kernel_apply(m, h, a);
        double val = m.costs[a].running.eval(x) - lam * (w_x - q);
        if (!std::isfinite(val))
            throw std::runtime_error("non-finite Hamiltonian objective");
        if (val < best_val) {
            best_val = val;
            best = a;
        }
    }
    return {best, best_val};
}

std::pair<int, double> boundary_argmin(const ModelSpec& m, const StatePoint& z,
                                       const ValueField& h) {
    int best = -1;
    double best_val = std::numeric_limits<double>::infinity();
    for (int a : feasible_actions(m, z)) {
        double val = m.costs[a].boundary.eval(z) + detail::kernel_apply(m, h, a);
        if (!std::isfinite(val))
            throw std::runtime_error("non-finite boundary objective");
        if (val < best_val) {
            best_val = val;
            best = a;
        }
    }
    return {best, best_val};
}

// ---- prepared-node dynamic programming --------------------------------

namespace detail {

namespace {

NodeDP build_node_dp(const ModelSpec& m, double x, double alpha,
                     const SolverOptions& opt) {
    NodeDP dp;
    dp.x = x;
    StatePoint p = StatePoint::interior1(x);

    double lam_max = 0.0;
    for (const ActionSpec& a : m.actions)
        lam_max = std::max(lam_max, scalar_box_max(a.rate, m.lo, m.hi));
    if ((alpha + lam_max) * opt.delta > 0.5)
        throw std::runtime_error(
            "step-size violation: (alpha + lambda_max) * delta exceeds 1/2 — "
            "reduce delta");

    HitTime ht = hit_time(m, p, opt);
    dp.finite_star = ht.finite;
    if (ht.finite) {
        dp.t_end = ht.t;
        StatePoint z = flow_at(m, p, ht.t, opt);
        dp.z = z.x1();
        for (int a : feasible_actions(m, z))
            dp.boundary_costs.emplace_back(a, m.costs[a].boundary.eval(z));
    } else {
        dp.t_end = tail_stop_time(m, alpha, opt);
        dp.eps_tail = tail_bound_report(m, alpha, dp.t_end, opt);
    }

    dp.K = std::max<long>(
        1, static_cast<long>(std::ceil(dp.t_end / opt.delta - 1e-12)));

    const int A = m.action_count();
    FlowCursor cur(m, p, opt);
    dp.affine = (A == 1);
    std::vector<double> lam_tmp, f_tmp;
    if (dp.affine) {
        lam_tmp.resize(dp.K);
        f_tmp.resize(dp.K);
    } else {
        dp.lam.assign(static_cast<std::size_t>(dp.K) * A, 0.0);
        dp.fcost.assign(static_cast<std::size_t>(dp.K) * A, 0.0);
        dp.feas.assign(static_cast<std::size_t>(dp.K) * A, 0);
    }

    for (long k = 0; k < dp.K; ++k) {
        cur.advance_to(opt.delta * static_cast<double>(k));
        const double* pos = cur.pos();
        bool any = false;
        for (int a = 0; a < A; ++a) {
            if (!m.actions[a].feasible.admits(pos)) continue;
            any = true;
            double lv = m.actions[a].rate.eval(pos, m.dimension);
            double fv = m.costs[a].running.eval(pos, m.dimension);
            if (dp.affine) {
                lam_tmp[k] = lv;
                f_tmp[k] = fv;
            } else {
                dp.lam[k * A + a] = lv;
                dp.fcost[k * A + a] = fv;
                dp.feas[k * A + a] = 1;
            }
        }
        if (!any)
            throw std::runtime_error("no feasible action along the flow line");
    }

    if (!dp.finite_star) {
        cur.advance_to(dp.t_end);
        dp.tail_x = cur.pos()[0];
    }

    if (dp.affine) {
        // Linearity of the backward recursion in (Qh, h(tail), rho):
        // w = A + B*Qh + C*h(tail) - D*rho, all coefficients nonnegative.
        if (dp.finite_star) {
            if (dp.boundary_costs.empty())
                throw std::runtime_error("no feasible action at the exit point");
            dp.A = dp.boundary_costs[0].second;
            dp.B = 1.0;
            dp.C = 0.0;
        } else {
            dp.A = 0.0;
            dp.B = 0.0;
            dp.C = 1.0;
        }
        dp.D = 0.0;
        for (long k = dp.K - 1; k >= 0; --k) {
            double dt = (k == dp.K - 1)
                            ? dp.t_end - opt.delta * static_cast<double>(k)
                            : opt.delta;
            double c = 1.0 - (alpha + lam_tmp[k]) * dt;
            dp.A = c * dp.A + dt * f_tmp[k];
            dp.B = c * dp.B + dt * lam_tmp[k];
            dp.C = c * dp.C;
            dp.D = c * dp.D + dt;
        }
    }
    return dp;
}

// Evaluate h at the tail point, clamped into the node hull so the result is
// a convex combination of node values (keeps the operator exactly monotone;
// the clamp bias is absorbed by the reported tail bound).
double tail_eval(const ValueField& h, double x) {
    double lo = h.grid().nodes.front(), hi = h.grid().nodes.back();
    return h.eval(std::clamp(x, lo, hi));
}

OneStageOutput run_node_dp_q(const ModelSpec& m, const NodeDP& dp, double alpha,
                             double delta, double rho, const ValueField& h,
                             const std::vector<double>& qvals, bool want_trace) {
    OneStageOutput out;
    out.eps_tail = dp.eps_tail;

    if (dp.finite_star) {
        int b_best = -1;
        double b_val = std::numeric_limits<double>::infinity();
        for (const auto& [a, r] : dp.boundary_costs) {
            double v = r + qvals[a];
            if (v < b_val) {
                b_val = v;
                b_best = a;
            }
        }
        out.has_boundary = true;
        out.boundary_action = b_best;
        out.boundary_value = b_val;
    }

    if (dp.affine) {
        double th = dp.finite_star ? 0.0 : tail_eval(h, dp.tail_x);
        out.value = ((dp.A + dp.B * qvals[0]) + dp.C * th) - dp.D * rho;
        if (want_trace) out.trace = ControlPath::constant(0);
        return out;
    }

    const int A = m.action_count();
    double w = dp.finite_star ? out.boundary_value : tail_eval(h, dp.tail_x);
    std::vector<int> picked;
    if (want_trace) picked.resize(dp.K, 0);

    for (long k = dp.K - 1; k >= 0; --k) {
        double dt = (k == dp.K - 1) ? dp.t_end - delta * static_cast<double>(k)
                                    : delta;
        double best = std::numeric_limits<double>::infinity();
        int best_a = -1;
        const std::size_t base = static_cast<std::size_t>(k) * A;
        for (int a = 0; a < A; ++a) {
            if (!dp.feas[base + a]) continue;
            double lam = dp.lam[base + a];
            double cand = (1.0 - (alpha + lam) * dt) * w +
                          dt * (dp.fcost[base + a] + lam * qvals[a]);
            if (cand < best) {
                best = cand;
                best_a = a;
            }
        }
        w = best - dt * rho;
        if (want_trace) picked[k] = best_a;
    }
    out.value = w;

    if (want_trace) {
        ControlPath path;
        path.breakpoints.push_back(0.0);
        path.actions.push_back(picked.empty() ? 0 : picked[0]);
        for (long k = 1; k < dp.K; ++k) {
            if (picked[k] != path.actions.back()) {
                path.breakpoints.push_back(delta * static_cast<double>(k));
                path.actions.push_back(picked[k]);
            }
        }
        path.boundary_action = dp.finite_star ? out.boundary_action : -1;
        out.trace = std::move(path);
    }
    return out;
}

} // namespace

BellmanTables build_bellman_tables(const ModelSpec& m, const Grid& grid,
                                   double alpha, const SolverOptions& opt) {
    require_1d(m);
    if (grid.size() < 2)
        throw std::invalid_argument("solver grid needs at least 2 nodes");
    BellmanTables t;
    t.alpha = alpha;
    t.delta = opt.delta;
    t.nodes.reserve(grid.size());
    for (int i = 0; i < grid.size(); ++i)
        t.nodes.push_back(build_node_dp(m, grid[i], alpha, opt));
    return t;
}

OneStageOutput run_node_dp(const ModelSpec& m, const NodeDP& dp, double alpha,
                           double delta, double rho, const ValueField& h,
                           bool want_trace) {
    std::vector<double> qvals(m.action_count());
    for (int a = 0; a < m.action_count(); ++a) qvals[a] = kernel_apply(m, h, a);
    return run_node_dp_q(m, dp, alpha, delta, rho, h, qvals, want_trace);
}

ValueField apply_bellman_tables(const ModelSpec& m, const Grid& grid,
                                const BellmanTables& tables, double rho,
                                const ValueField& h, const SolverOptions& opt) {
    const int n = grid.size();
    std::vector<double> qvals(m.action_count());
    for (int a = 0; a < m.action_count(); ++a) qvals[a] = kernel_apply(m, h, a);

    std::vector<double> values(n, 0.0);
    auto worker = [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i)
            values[i] = run_node_dp_q(m, tables.nodes[i], tables.alpha,
                                      tables.delta, rho, h, qvals, false)
                            .value;
    };
    int width = std::max(1, opt.threads);
    if (width == 1 || n < 2 * width) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        int chunk = (n + width - 1) / width;
        for (int w = 0; w < width; ++w) {
            int lo = w * chunk, hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    ValueField out(grid, std::move(values), m.lo[0], m.hi[0]);
    // One boundary entry per distinct reachable exit point.
    for (const NodeDP& dp : tables.nodes) {
        if (!dp.finite_star) continue;
        bool seen = false;
        for (const auto& [zc, zv] : out.boundary_values())
            if (zc == dp.z) seen = true;
        if (seen) continue;
        double b_val = std::numeric_limits<double>::infinity();
        for (const auto& [a, r] : dp.boundary_costs)
            b_val = std::min(b_val, r + qvals[a]);
        out.set_boundary_value(dp.z, b_val);
    }
    return out;
}

} // namespace detail

OneStageOutput one_stage_value(const ModelSpec& m, const StatePoint& x,
                               double alpha, double rho, const ValueField& h,
                               const SolverOptions& opt) {
    require_1d(m);
    if (alpha < 0.0) throw std::domain_error("alpha must be nonnegative");
    if (!m.inside_open_box(x.coords.data()))
        throw std::domain_error("one-stage evaluation needs an interior state");
    detail::NodeDP dp = detail::build_node_dp(m, x.x1(), alpha, opt);
    return detail::run_node_dp(m, dp, alpha, opt.delta, rho, h, true);
}

ValueField apply_bellman(const ModelSpec& m, const Grid& grid, double alpha,
                         double rho, const ValueField& h,
                         const SolverOptions& opt) {
    detail::BellmanTables t = detail::build_bellman_tables(m, grid, alpha, opt);
    return detail::apply_bellman_tables(m, grid, t, rho, h, opt);
}

double relaxed_one_stage_check(const ModelSpec& m, const StatePoint& x,
                               double alpha, double rho, const ValueField& h,
                               int n_samples, std::uint64_t seed,
                               const SolverOptions& opt) {
    if (n_samples < 1) throw std::invalid_argument("need at least one sample");
    double w_x = one_stage_value(m, x, alpha, rho, h, opt).value;

    std::vector<int> acts = feasible_actions(m, x);
    std::vector<double> ham(acts.size());
    double vertex_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < acts.size(); ++i) {
        int a = acts[i];
        double lam = m.actions[a].rate.eval(x);
        ham[i] = m.costs[a].running.eval(x) -
                 lam * (w_x - detail::kernel_apply(m, h, a));
        vertex_min = std::min(vertex_min, ham[i]);
    }

    RngStream rng(seed, 0);
    double mix_min = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n_samples; ++s) {
        double norm = 0.0;
        std::vector<double> wgt(acts.size());
        for (double& wv : wgt) {
            wv = rng.next_double();
            norm += wv;
        }
        double val = 0.0;
        for (std::size_t i = 0; i < acts.size(); ++i)
            val += (wgt[i] / norm) * ham[i];
        mix_min = std::min(mix_min, val);
    }
    return mix_min - vertex_min;
}

std::array<double, 4> decompose_check(const ModelSpec& m, const StatePoint& x,
                                      const ControlPath& path, double t,
                                      double alpha, const ValueField& h,
                                      const SolverOptions& opt) {
    if (t <= 0.0) throw std::domain_error("split time must be positive");
    HitTime ht = hit_time(m, x, opt);
    if (ht.finite && t >= ht.t)
        throw std::domain_error("split time must precede the boundary hit");

    ControlPath shifted;
    shifted.breakpoints.push_back(0.0);
    shifted.actions.push_back(path.action_at(t));
    for (std::size_t i = 0; i < path.breakpoints.size(); ++i)
        if (path.breakpoints[i] > t) {
            shifted.breakpoints.push_back(path.breakpoints[i] - t);
            shifted.actions.push_back(path.actions[i]);
        }
    shifted.boundary_action = path.boundary_action;

    StatePoint y = flow_at(m, x, t, opt);

    PathQuad full = integrate_path(m, x, path, alpha, &h, -1.0, opt);
    PathQuad part = integrate_path(m, x, path, alpha, &h, t, opt);
    PathQuad sub = integrate_path(m, y, shifted, alpha, &h, -1.0, opt);
    double W = part.weight_end;

    double H_full = 0.0, H_sub = 0.0, Gb_full = 0.0, Gb_sub = 0.0;
    if (full.reached_boundary) {
        double r = eval_boundary_cost(m, full.z, path.boundary_action);
        H_full = full.weight_end * r;
        Gb_full =
            full.weight_end * detail::kernel_apply(m, h, path.boundary_action);
    }
    if (sub.reached_boundary) {
        double r = eval_boundary_cost(m, sub.z, shifted.boundary_action);
        H_sub = sub.weight_end * r;
        Gb_sub =
            sub.weight_end * detail::kernel_apply(m, h, shifted.boundary_action);
    }

    return {std::abs(full.calL - (part.calL + W * sub.calL)),
            std::abs(full.Lf - (part.Lf + W * sub.Lf)),
            std::abs(H_full - W * H_sub),
            std::abs((full.Gin + Gb_full) - (part.Gin + W * (sub.Gin + Gb_sub)))};
}

} // namespace pdmp
