#include "pdmp/discounted.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "bellman_core.hpp"

namespace pdmp {

int FeedbackPolicy::lookup_boundary(double z) const {
    if (boundary_action.empty())
        throw std::domain_error("policy stores no boundary actions");
    int best = boundary_action[0].second;
    double best_d = std::abs(boundary_action[0].first - z);
    for (const auto& [zc, a] : boundary_action) {
        double d = std::abs(zc - z);
        if (d < best_d) {
            best_d = d;
            best = a;
        }
    }
    return best;
}

std::string FeedbackPolicy::to_csv() const {
    std::ostringstream os;
    os << "kind,x,action\n";
    for (int i = 0; i < grid.size(); ++i)
        os << "node," << fmt_g17(grid[i]) << "," << interior_action[i] << "\n";
    for (const auto& [zc, a] : boundary_action)
        os << "boundary," << fmt_g17(zc) << "," << a << "\n";
    return os.str();
}

FeedbackPolicy FeedbackPolicy::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("kind,x,action", 0) != 0)
        throw std::invalid_argument("policy CSV missing header");
    FeedbackPolicy p;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string kind, xs, as;
        if (!std::getline(row, kind, ',') || !std::getline(row, xs, ',') ||
            !std::getline(row, as))
            throw std::invalid_argument("malformed policy CSV row: " + line);
        double x = std::strtod(xs.c_str(), nullptr);
        int a = std::atoi(as.c_str());
        if (kind == "node") {
            p.grid.nodes.push_back(x);
            p.interior_action.push_back(a);
        } else if (kind == "boundary") {
            p.boundary_action.emplace_back(x, a);
        } else {
            throw std::invalid_argument("unknown policy CSV kind: " + kind);
        }
    }
    if (p.grid.nodes.empty())
        throw std::invalid_argument("policy CSV carries no interior nodes");
    return p;
}

DiscountedSolution value_iteration(const ModelSpec& m, const Grid& grid,
                                   double alpha, const SolverOptions& opt) {
    if (!(alpha > 0.0))
        throw std::invalid_argument("alpha must be positive for the discounted solve");

    detail::BellmanTables tables =
        detail::build_bellman_tables(m, grid, alpha, opt);

    DiscountedSolution sol;
    sol.alpha = alpha;

    ValueField v = ValueField::constant(m, grid, 0.0);
    double prev_delta = std::numeric_limits<double>::infinity();
    bool converged = false;

    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        ValueField w = detail::apply_bellman_tables(m, grid, tables, 0.0, v, opt);

        double delta = 0.0, vmax = 0.0;
        for (int i = 0; i < grid.size(); ++i) {
            double diff = w.values()[i] - v.values()[i];
            if (diff < -1e-10) {
                std::ostringstream os;
                os << "monotonicity violation at node " << grid[i] << ": "
                   << fmt_g17(diff)
                   << " (signals a quadrature/step-size bug)";
                throw std::runtime_error(os.str());
            }
            delta = std::max(delta, std::abs(diff));
            vmax = std::max(vmax, w.values()[i]);
        }
        sol.sup_deltas.push_back(delta);
        sol.iterations = iter;
        v = std::move(w);

        if (alpha * vmax > opt.rho_cap)
            throw std::runtime_error(
                "discounted value grew past rho_cap: the value appears "
                "unbounded (check the boundedness assumptions)");

        // Two consecutive sup-deltas below tol certify both the Cauchy
        // criterion and the fixed-point residual at the previous iterate.
        if (delta <= opt.tol && prev_delta <= opt.tol) {
            converged = true;
            break;
        }
        prev_delta = delta;
    }
    if (!converged)
        throw std::runtime_error("value iteration did not converge in max_iter");

    sol.value = v;
    auto [up, down] = fixed_point_residual(m, grid, alpha, v, opt);
    sol.residual_up = up;
    sol.residual_down = down;
    sol.policy = extract_policy(m, grid, v, opt);
    return sol;
}

FeedbackPolicy extract_policy(const ModelSpec& m, const Grid& grid,
                              const ValueField& J, const SolverOptions& opt) {
    (void)opt;
    FeedbackPolicy p;
    p.grid = grid;
    p.interior_action.resize(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
        StatePoint x = StatePoint::interior1(grid[i]);
        p.interior_action[i] = hamiltonian_argmin(m, x, J.values()[i], J).first;
    }
    // Boundary actions at every exit point reachable from the grid.
    for (const auto& [zc, zv] : J.boundary_values()) {
        (void)zv;
        StatePoint z = StatePoint::boundary({zc});
        p.boundary_action.emplace_back(zc, boundary_argmin(m, z, J).first);
    }
    if (p.boundary_action.empty()) {
        // J may have been loaded from CSV without boundary rows; recompute
        // reachability from the grid nodes.
        for (int i = 0; i < grid.size(); ++i) {
            StatePoint x = StatePoint::interior1(grid[i]);
            HitTime ht = hit_time(m, x, opt);
            if (!ht.finite) continue;
            StatePoint z = flow_at(m, x, ht.t, opt);
            bool seen = false;
            for (const auto& [zc, a] : p.boundary_action)
                if (zc == z.x1()) seen = true;
            if (!seen)
                p.boundary_action.emplace_back(z.x1(),
                                               boundary_argmin(m, z, J).first);
        }
    }
    return p;
}

std::pair<double, double> fixed_point_residual(const ModelSpec& m, const Grid& grid,
                                               double alpha, const ValueField& J,
                                               const SolverOptions& opt) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    ValueField W = apply_bellman(m, grid, alpha, 0.0, J, opt);
    double up = 0.0, down = 0.0;
    for (int i = 0; i < grid.size(); ++i) {
        double diff = W.values()[i] - J.values()[i];
        up = std::max(up, diff);
        down = std::max(down, -diff);
    }
    return {up, down};
}

} // namespace pdmp
