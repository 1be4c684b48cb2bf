#include "pdmp/average.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pdmp {

std::vector<double> default_alpha_schedule() {
    std::vector<double> alphas;
    for (int k = 0; k <= 8; ++k) alphas.push_back(0.5 * std::pow(2.0, -k));
    return alphas;
}

namespace {

// J - J(x0) on nodes and boundary entries.  x0 is snapped to a grid node
// when one sits within 1e-12, so the normalization h(x0) = 0 is exact on the
// shipped grids.
ValueField normalize_bias(const ValueField& J, double x0) {
    double c;
    int near = J.grid().nearest(x0);
    if (std::fabs(J.grid()[near] - x0) <= 1e-12)
        c = J.values()[near];
    else
        c = J.eval(x0);
    std::vector<double> vals = J.values();
    for (double& v : vals) v -= c;
    ValueField h(J.grid(), std::move(vals), J.box_lo(), J.box_hi());
    for (const auto& [z, v] : J.boundary_values())
        h.set_boundary_value(z, v - c);
    return h;
}

} // namespace

AverageSolution vanishing_sweep(const ModelSpec& m, const Grid& grid, double x0,
                                const std::vector<double>& alpha_schedule,
                                const SolverOptions& opt, std::uint64_t mc_seed,
                                int mc_reps, double mc_horizon) {
    if (alpha_schedule.empty())
        throw std::invalid_argument("alpha schedule must be non-empty");
    for (std::size_t k = 0; k < alpha_schedule.size(); ++k) {
        if (!(alpha_schedule[k] > 0.0))
            throw std::invalid_argument("alpha schedule entries must be positive");
        if (k > 0 && !(alpha_schedule[k] < alpha_schedule[k - 1]))
            throw std::invalid_argument(
                "alpha schedule must be strictly decreasing");
    }
    if (!m.inside_open_box(&x0))
        throw std::domain_error("sweep anchor x0 must be interior");

    AverageSolution out;
    out.x0 = x0;
    for (double alpha : alpha_schedule) {
        DiscountedSolution sol = value_iteration(m, grid, alpha, opt);
        ValueField h_k = normalize_bias(sol.value, x0);

        SweepPoint pt;
        pt.alpha = alpha;
        pt.rho = alpha * (sol.value.eval(x0));
        pt.h_sup = *std::max_element(h_k.values().begin(), h_k.values().end());
        pt.h_inf = *std::min_element(h_k.values().begin(), h_k.values().end());
        pt.iterations = sol.iterations;
        out.trace.push_back(pt);
        out.h_fields.push_back(std::move(h_k));

        if (!(pt.rho <= opt.rho_cap))
            throw std::runtime_error(
                "average-cost sweep unbounded: rho exceeded rho_cap (the "
                "standing stability assumptions look violated)");
    }

    out.rho = out.trace.back().rho;
    out.h = out.h_fields.back();
    out.w = apply_bellman(m, grid, 0.0, out.rho, out.h, opt);

    std::vector<double> res(grid.size());
    for (int i = 0; i < grid.size(); ++i)
        res[i] = out.w.values()[i] - out.h.values()[i];
    out.residual = ValueField(grid, std::move(res), out.h.box_lo(), out.h.box_hi());

    out.policy = extract_policy(m, grid, out.h, opt);
    out.mc_check = mc_average_cost(m, StatePoint::interior1(x0),
                                   ControlStrategy::feedback_policy(out.policy),
                                   mc_horizon, mc_reps, mc_seed, opt);

    std::size_t n = out.h_fields.size();
    for (std::size_t k = (n - 1) / 2; k + 1 < n; ++k)
        out.h_spread = std::max(
            out.h_spread, out.h_fields[k].sup_delta(out.h_fields.back()));
    return out;
}

BoundednessReport boundedness_report(const std::vector<SweepPoint>& trace,
                                     const std::vector<ValueField>& h_fields,
                                     double rho_cap) {
    if (trace.size() < 2)
        throw std::invalid_argument(
            "boundedness report: >= 2 points required to audit a sweep");
    if (h_fields.size() != trace.size())
        throw std::invalid_argument(
            "boundedness report: one bias field per sweep point required");

    BoundednessReport rep;
    rep.C = -std::numeric_limits<double>::infinity();
    double h_min = std::numeric_limits<double>::infinity();
    for (const SweepPoint& pt : trace) {
        rep.C = std::max(rep.C, pt.rho);
        h_min = std::min(h_min, pt.h_inf);
    }
    rep.K_h = std::max(0.0, -h_min);

    rep.b.assign(h_fields[0].values().size(),
                 -std::numeric_limits<double>::infinity());
    for (const ValueField& h : h_fields)
        for (std::size_t i = 0; i < rep.b.size(); ++i)
            rep.b[i] = std::max(rep.b[i], h.values()[i]);

    std::ostringstream detail;
    if (rep.C > rho_cap) {
        rep.blow_up = true;
        detail << "rho exceeded rho_cap (" << rep.C << " > " << rho_cap << ")";
    } else {
        // Runaway ratio: rho still multiplying as alpha halves means the
        // discounted values scale like a power of 1/alpha, not like 1/alpha.
        std::size_t n = trace.size();
        if (n >= 3 && trace[n - 1].rho > 2.0 * trace[n - 2].rho &&
            trace[n - 2].rho > 2.0 * trace[n - 3].rho &&
            trace[n - 1].rho > 1.0) {
            rep.blow_up = true;
            detail << "rho grew by >2x over the last two halvings ("
                   << trace[n - 3].rho << " -> " << trace[n - 2].rho << " -> "
                   << trace[n - 1].rho << ")";
        } else {
            detail << "rho bounded by " << rep.C << ", bias below by " << rep.K_h;
        }
    }
    rep.detail = detail.str();
    return rep;
}

ValueField optimality_residual(const ModelSpec& m, const Grid& grid, double rho,
                               const ValueField& h, const SolverOptions& opt) {
    ValueField w = apply_bellman(m, grid, 0.0, rho, h, opt);
    std::vector<double> res(grid.size());
    for (int i = 0; i < grid.size(); ++i)
        res[i] = w.values()[i] - h.values()[i];
    return ValueField(grid, std::move(res), h.box_lo(), h.box_hi());
}

DriftReport drift_condition_check(const ModelSpec& m, const ControlStrategy& policy,
                                  const ValueField& h,
                                  const std::vector<double>& horizons, int n_rep,
                                  std::uint64_t seed, const SolverOptions& opt) {
    if (n_rep < 1) throw std::invalid_argument("need at least one replication");
    // Start from the interior node nearest the box center; the condition is
    // a statement about every start, this is a spot check.
    double mid = 0.5 * (h.box_lo() + h.box_hi());
    StatePoint x0 = StatePoint::interior1(h.grid()[h.grid().nearest(mid)]);

    DriftReport rep;
    for (std::size_t row = 0; row < horizons.size(); ++row) {
        double T = horizons[row];
        if (!(T > 0.0)) throw std::invalid_argument("horizons must be positive");
        std::vector<double> vals(n_rep);
        for (int i = 0; i < n_rep; ++i) {
            RngStream rng(seed + 1000003ULL * row, static_cast<std::uint64_t>(i));
            TrajectorySample tr =
                sample_trajectory(m, x0, policy, T, rng, 0.0, 1000000, opt);
            const StatePoint& z =
                tr.events.empty() ? tr.start : tr.events.back().state;
            double t_last = tr.events.empty() ? 0.0 : tr.events.back().time;
            StatePoint xT = flow_at(m, z, T - t_last, opt);
            vals[i] = h.eval(xT.x1()) / T;
        }
        DriftRow r;
        r.horizon = T;
        r.estimate = pairwise_sum(vals) / static_cast<double>(n_rep);
        if (n_rep > 1) {
            std::vector<double> sq(vals.size());
            for (std::size_t i = 0; i < vals.size(); ++i) {
                double d = vals[i] - r.estimate;
                sq[i] = d * d;
            }
            r.stderr_ = std::sqrt(pairwise_sum(sq) /
                                  static_cast<double>((n_rep - 1) * n_rep));
        }
        rep.rows.push_back(r);
    }
    if (!rep.rows.empty()) {
        double first = std::fabs(rep.rows.front().estimate);
        double last = std::fabs(rep.rows.back().estimate);
        rep.trend_vanishing =
            last <= std::max(0.5 * first, 3.0 * rep.rows.back().stderr_);
    }
    return rep;
}

} // namespace pdmp
