#include "pdmp/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bellman_core.hpp"

namespace pdmp {

double pairwise_sum(const double* v, std::size_t n) {
    if (n == 0) return 0.0;
    if (n == 1) return v[0];
    std::size_t mid = n / 2;
    return pairwise_sum(v, mid) + pairwise_sum(v + mid, n - mid);
}

std::string TrajectorySample::to_csv() const {
    auto coords = [](const StatePoint& p) {
        std::string s;
        for (std::size_t i = 0; i < p.coords.size(); ++i) {
            if (i) s += ";";
            s += fmt_g17(p.coords[i]);
        }
        return s;
    };
    std::ostringstream os;
    os << "n,T,x,cause\n";
    os << "0,0," << coords(start) << ",init\n";
    for (std::size_t i = 0; i < events.size(); ++i)
        os << (i + 1) << "," << fmt_g17(events[i].time) << ","
           << coords(events[i].state) << ","
           << (events[i].from_boundary ? "boundary" : "spontaneous") << "\n";
    return os.str();
}

namespace detail {

ControlPath strategy_path(const ModelSpec& m, const ControlStrategy& strategy,
                          long n, const StatePoint& z, double t_end,
                          const SolverOptions& opt) {
    if (strategy.kind == ControlStrategy::Kind::open_loop) {
        if (strategy.path_table.empty())
            throw std::invalid_argument("open-loop strategy carries no paths");
        std::size_t idx = std::min<std::size_t>(
            static_cast<std::size_t>(std::max<long>(n, 0)),
            strategy.path_table.size() - 1);
        return strategy.path_table[idx];
    }

    // Feedback: quantize the nearest-node policy along the flow line, one
    // action per quadrature cell, chosen at the cell midpoint.
    const FeedbackPolicy& pol = strategy.policy;
    ControlPath path;
    long cells = std::max<long>(
        1, static_cast<long>(std::ceil(t_end / opt.delta_quad - 1e-12)));
    FlowCursor cur(m, z, opt);
    for (long k = 0; k < cells; ++k) {
        double mid = std::min(opt.delta_quad * (static_cast<double>(k) + 0.5),
                              t_end);
        cur.advance_to(mid);
        int a = pol.lookup(cur.pos()[0]);
        if (path.actions.empty() || path.actions.back() != a) {
            path.breakpoints.push_back(
                path.actions.empty() ? 0.0
                                     : opt.delta_quad * static_cast<double>(k));
            path.actions.push_back(a);
        }
    }
    HitTime ht = hit_time(m, z, opt);
    if (ht.finite && !pol.boundary_action.empty()) {
        StatePoint exit = flow_at(m, z, ht.t, opt);
        path.boundary_action = pol.lookup_boundary(exit.x1());
    } else if (ht.finite) {
        // Policy without boundary rows: fall back to the action active when
        // the line exits.
        path.boundary_action = path.actions.back();
    } else {
        path.boundary_action = -1;
    }
    return path;
}

} // namespace detail

JumpDraw jump_time_from_uniform(const ModelSpec& m, const StatePoint& x,
                                const ControlPath& path, double u,
                                const SolverOptions& opt) {
    if (!(u > 0.0 && u < 1.0))
        throw std::domain_error("uniform draw must lie in (0, 1)");
    path.validate();
    double target = -std::log(u);
    HitTime ht = hit_time(m, x, opt);
    double cap = ht.finite ? ht.t : opt.t_cert;

    // March the cumulative hazard until it crosses the target, then bisect
    // inside the bracketing cell on the local trapezoid model.
    detail::FlowCursor cur(m, x, opt);
    std::vector<double> cuts{0.0};
    for (double b : path.breakpoints)
        if (b > 0.0 && b < cap) cuts.push_back(b);
    cuts.push_back(cap);
    std::sort(cuts.begin(), cuts.end());

    double Lam = 0.0;
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        double s0 = cuts[seg], s1 = cuts[seg + 1];
        const ScalarFamily& rate = m.actions[path.action_at(s0)].rate;
        long K = std::max<long>(
            1, static_cast<long>(std::ceil((s1 - s0) / opt.delta_quad - 1e-12)));
        cur.advance_to(s0);
        double lam_prev = rate.eval(cur.pos(), m.dimension);
        double t_prev = s0;
        for (long k = 1; k <= K; ++k) {
            double s = (k == K) ? s1
                                : s0 + (s1 - s0) * static_cast<double>(k) /
                                           static_cast<double>(K);
            cur.advance_to(s);
            double lam = rate.eval(cur.pos(), m.dimension);
            double inc = 0.5 * (s - t_prev) * (lam_prev + lam);
            if (Lam + inc >= target && inc > 0.0) {
                // Bisect Lam + (t-t_prev)/2 (lam_prev + lam(t)) = target; the
                // probe evaluates the flow from the absolute start point so
                // the bracket can shrink in either direction.
                double a = t_prev, b = s;
                std::array<double, kMaxDim> buf{};
                while (b - a > 1e-10) {
                    double mid = 0.5 * (a + b);
                    detail::flow_position(m, x.coords.data(), mid, opt,
                                          buf.data());
                    double lam_mid = rate.eval(buf.data(), m.dimension);
                    double part = 0.5 * (mid - t_prev) * (lam_prev + lam_mid);
                    if (Lam + part < target)
                        a = mid;
                    else
                        b = mid;
                }
                return JumpDraw{0.5 * (a + b), false};
            }
            Lam += inc;
            lam_prev = lam;
            t_prev = s;
        }
    }

    if (ht.finite) return JumpDraw{ht.t, true};  // censored at the boundary
    return JumpDraw{std::numeric_limits<double>::infinity(), false};
}

JumpDraw sample_jump_time(const ModelSpec& m, const StatePoint& x,
                          const ControlStrategy& strategy, RngStream& rng,
                          const SolverOptions& opt) {
    HitTime ht = hit_time(m, x, opt);
    double cap = ht.finite ? ht.t : opt.t_cert;
    ControlPath path = detail::strategy_path(m, strategy, 0, x, cap, opt);
    return jump_time_from_uniform(m, x, path, rng.next_double(), opt);
}

namespace {

// Post-jump draw: inverse CDF over the atom list in declaration order.
StatePoint kernel_draw(const ModelSpec& m, int a, double u) {
    const std::vector<KernelAtom>& atoms = m.kernels[a].atoms;
    double cum = 0.0;
    for (const KernelAtom& atom : atoms) {
        cum += atom.weight;
        if (u < cum) return atom.target;
    }
    return atoms.back().target;
}

// Running-cost integrals over one inter-jump segment [0, t_seg] along the
// flow from z under `path`, both undiscounted and discounted by
// e^{-alpha (t_base + s)}.
void accumulate_running_cost(const ModelSpec& m, const StatePoint& z,
                             const ControlPath& path, double t_seg,
                             double t_base, double alpha,
                             const SolverOptions& opt, double* plain,
                             double* discounted) {
    if (t_seg <= 0.0) return;
    detail::FlowCursor cur(m, z, opt);
    std::vector<double> cuts{0.0};
    for (double b : path.breakpoints)
        if (b > 0.0 && b < t_seg) cuts.push_back(b);
    cuts.push_back(t_seg);
    std::sort(cuts.begin(), cuts.end());

    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        double s0 = cuts[seg], s1 = cuts[seg + 1];
        const ScalarFamily& fam = m.costs[path.action_at(s0)].running;
        long K = std::max<long>(
            1, static_cast<long>(std::ceil((s1 - s0) / opt.delta_quad - 1e-12)));
        cur.advance_to(s0);
        double f_prev = fam.eval(cur.pos(), m.dimension);
        double w_prev = (alpha > 0.0) ? std::exp(-alpha * (t_base + s0)) : 1.0;
        double t_prev = s0;
        for (long k = 1; k <= K; ++k) {
            double s = (k == K) ? s1
                                : s0 + (s1 - s0) * static_cast<double>(k) /
                                           static_cast<double>(K);
            cur.advance_to(s);
            double f = fam.eval(cur.pos(), m.dimension);
            double w = (alpha > 0.0) ? std::exp(-alpha * (t_base + s)) : 1.0;
            double dt = s - t_prev;
            *plain += 0.5 * dt * (f_prev + f);
            *discounted += 0.5 * dt * (w_prev * f_prev + w * f);
            f_prev = f;
            w_prev = w;
            t_prev = s;
        }
    }
}

} // namespace

TrajectorySample sample_trajectory(const ModelSpec& m, const StatePoint& x0,
                                   const ControlStrategy& strategy,
                                   double horizon, RngStream& rng, double alpha,
                                   long n_max, const SolverOptions& opt) {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (!m.inside_open_box(x0.coords.data()))
        throw std::domain_error("initial state must be interior");

    TrajectorySample out;
    out.start = x0;
    StatePoint z = x0;
    double T = 0.0;
    long n = 0;

    while (T < horizon) {
        if (n >= n_max) {
            out.truncated = true;
            break;
        }
        double remaining = horizon - T;
        HitTime ht = hit_time(m, z, opt);
        double cap = ht.finite ? ht.t : opt.t_cert;
        ControlPath path = detail::strategy_path(
            m, strategy, n, z, std::min(cap, remaining), opt);
        JumpDraw draw = jump_time_from_uniform(m, z, path, rng.next_double(), opt);

        if (draw.time > remaining) {
            // Censored at the horizon (a jump landing exactly on the horizon
            // still counts): flow out the clock, no further jump.
            if (!std::isfinite(draw.time) && remaining > opt.t_cert) {
                // "No jump" was only certified up to t_cert; accept the
                // censoring only when the hazard has died out there.
                std::array<double, kMaxDim> buf{};
                detail::flow_position(m, z.coords.data(), opt.t_cert, opt,
                                      buf.data());
                int a_end = path.action_at(opt.t_cert);
                if (m.actions[a_end].rate.eval(buf.data(), m.dimension) > 1e-12)
                    throw std::runtime_error(
                        "jump time not resolved within the certification "
                        "horizon; raise t_cert");
            }
            accumulate_running_cost(m, z, path, remaining, T, alpha, opt,
                                    &out.running_cost_integral,
                                    &out.discounted_running);
            T = horizon;
            break;
        }

        accumulate_running_cost(m, z, path, draw.time, T, alpha, opt,
                                &out.running_cost_integral,
                                &out.discounted_running);
        T += draw.time;

        int jump_action;
        if (draw.boundary) {
            StatePoint exit = flow_at(m, z, draw.time, opt);
            jump_action = path.boundary_action;
            if (jump_action < 0)
                throw std::runtime_error("boundary hit without a boundary action");
            double r = eval_boundary_cost(m, exit, jump_action);
            out.boundary_cost_sum += r;
            out.discounted_boundary += std::exp(-alpha * T) * r;
            out.pstar += 1;
        } else {
            jump_action = path.action_at(draw.time);
        }
        z = kernel_draw(m, jump_action, rng.next_double());
        ++n;
        out.events.push_back(TrajectoryEvent{T, z, draw.boundary});
    }
    return out;
}

namespace {

McEstimate reduce_replications(std::vector<double> values, std::uint64_t seed,
                               double horizon) {
    McEstimate est;
    est.n_rep = static_cast<int>(values.size());
    est.seed = seed;
    est.horizon = horizon;
    est.mean = pairwise_sum(values) / static_cast<double>(values.size());
    if (values.size() > 1) {
        std::vector<double> sq(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            double d = values[i] - est.mean;
            sq[i] = d * d;
        }
        double var = pairwise_sum(sq) /
                     static_cast<double>((values.size() - 1) * values.size());
        est.stderr_ = std::sqrt(var);
    }
    return est;
}

template <typename PerRep>
std::vector<double> run_replications(int n_rep, int threads, PerRep&& body) {
    if (n_rep < 1) throw std::invalid_argument("need at least one replication");
    std::vector<double> values(n_rep, 0.0);
    int width = std::max(1, threads);
    if (width == 1 || n_rep < 2 * width) {
        for (int i = 0; i < n_rep; ++i) values[i] = body(i);
    } else {
        std::vector<std::thread> pool;
        int chunk = (n_rep + width - 1) / width;
        for (int w = 0; w < width; ++w) {
            int lo = w * chunk, hi = std::min(n_rep, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (int i = lo; i < hi; ++i) values[i] = body(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    return values;
}

} // namespace

McEstimate mc_discounted_cost(const ModelSpec& m, const StatePoint& x0,
                              const ControlStrategy& strategy, double alpha,
                              int n_rep, double horizon, std::uint64_t seed,
                              const SolverOptions& opt) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    std::vector<double> values =
        run_replications(n_rep, opt.threads, [&](int i) {
            RngStream rng(seed, static_cast<std::uint64_t>(i));
            TrajectorySample tr = sample_trajectory(m, x0, strategy, horizon, rng,
                                                    alpha, 1000000, opt);
            return tr.discounted_running + tr.discounted_boundary;
        });
    McEstimate est = reduce_replications(std::move(values), seed, horizon);

    // Crude truncation bound: sup f / alpha plus a boundary-rate surrogate.
    double f_max = 0.0, r_max = 0.0;
    for (const CostSpec& c : m.costs) {
        f_max = std::max(f_max, detail::scalar_box_max(c.running, m.lo, m.hi));
        r_max = std::max(r_max, detail::scalar_box_max(c.boundary, m.lo, m.hi));
    }
    HitTime ht = hit_time(m, x0, opt);
    double nu = ht.finite ? 1.0 / std::max(ht.t, opt.delta) : 0.0;
    est.tail_bound = std::exp(-alpha * horizon) * (f_max + r_max * nu) / alpha;
    return est;
}

McEstimate mc_average_cost(const ModelSpec& m, const StatePoint& x0,
                           const ControlStrategy& strategy, double horizon,
                           int n_rep, std::uint64_t seed,
                           const SolverOptions& opt) {
    std::vector<double> values =
        run_replications(n_rep, opt.threads, [&](int i) {
            RngStream rng(seed, static_cast<std::uint64_t>(i));
            TrajectorySample tr = sample_trajectory(m, x0, strategy, horizon, rng,
                                                    0.0, 1000000, opt);
            return (tr.running_cost_integral + tr.boundary_cost_sum) / horizon;
        });
    return reduce_replications(std::move(values), seed, horizon);
}

McEstimate mc_truncated_cost(const ModelSpec& m, const StatePoint& x0,
                             const ControlStrategy& strategy, double alpha,
                             int m_jumps, int n_rep, std::uint64_t seed,
                             const SolverOptions& opt) {
    if (alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
    if (m_jumps < 0) throw std::invalid_argument("jump count must be nonnegative");
    if (m_jumps == 0) {
        McEstimate est;
        est.n_rep = n_rep;
        est.seed = seed;
        return est;
    }
    // Stop at the m-th jump; the horizon only guards against jump-free flows.
    double guard = opt.t_cert * static_cast<double>(m_jumps + 1);
    std::vector<double> values =
        run_replications(n_rep, opt.threads, [&](int i) {
            RngStream rng(seed, static_cast<std::uint64_t>(i));
            TrajectorySample tr = sample_trajectory(m, x0, strategy, guard, rng,
                                                    alpha, m_jumps, opt);
            if (static_cast<long>(tr.events.size()) < m_jumps && !tr.truncated)
                throw std::runtime_error(
                    "trajectory produced no jump within the certification "
                    "horizon; the truncated cost is undefined");
            return tr.discounted_running + tr.discounted_boundary;
        });
    McEstimate est = reduce_replications(std::move(values), seed, guard);
    est.horizon = 0.0;
    return est;
}

double suggest_discounted_horizon(const ModelSpec& m, const Grid& grid,
                                  double alpha, double eps) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    double f_max = 0.0, r_max = 0.0;
    for (const CostSpec& c : m.costs) {
        f_max = std::max(f_max, detail::scalar_box_max(c.running, m.lo, m.hi));
        r_max = std::max(r_max, detail::scalar_box_max(c.boundary, m.lo, m.hi));
    }
    double t_min = std::numeric_limits<double>::infinity();
    SolverOptions opt = m.defaults;
    for (int i = 0; i < grid.size(); ++i) {
        HitTime ht = hit_time(m, StatePoint::interior1(grid[i]), opt);
        if (ht.finite) t_min = std::min(t_min, ht.t);
    }
    double nu = std::isfinite(t_min) ? 1.0 / std::max(t_min, opt.delta) : 0.0;
    double bound = (f_max + r_max * nu) / alpha;
    if (bound <= eps) return 1.0;
    return std::max(1.0, std::log(bound / eps) / alpha);
}

} // namespace pdmp
