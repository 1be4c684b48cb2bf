#include "pdmp/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pdmp {

namespace detail {

namespace {

// One RK4 step of the diagonal affine ODE x' = a x + b.
inline double rk4_affine(double x, double a, double b, double h) {
    double k1 = a * x + b;
    double k2 = a * (x + 0.5 * h * k1) + b;
    double k3 = a * (x + 0.5 * h * k2) + b;
    double k4 = a * (x + h * k3) + b;
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace

FlowCursor::FlowCursor(const ModelSpec& m, const StatePoint& x,
                       const SolverOptions& opt)
    : m_(&m), opt_(opt), dim_(m.dimension) {
    if (static_cast<int>(x.coords.size()) != dim_)
        throw std::domain_error("state dimension mismatch");
    for (int i = 0; i < dim_; ++i) x0_[i] = x.coords[i];
    pos_ = x0_;
}

void FlowCursor::advance_to(double t) {
    if (t < t_ - 1e-15) throw std::domain_error("flow cursor cannot move backward");
    const ModelSpec& m = *m_;
    switch (m.flow.kind) {
        case FlowFamily::Kind::linear:
            // Evaluated from the start point at absolute time: no drift.
            for (int i = 0; i < dim_; ++i) pos_[i] = x0_[i] + m.flow.p0[i] * t;
            break;
        case FlowFamily::Kind::exp_decay:
            for (int i = 0; i < dim_; ++i) {
                double c = m.flow.p0[i];
                pos_[i] = c + (x0_[i] - c) * std::exp(-m.flow.p1[i] * t);
            }
            break;
        case FlowFamily::Kind::affine_ode: {
            double remaining = t - t_;
            while (remaining > 1e-18) {
                double h = std::min(remaining, opt_.delta_flow);
                for (int i = 0; i < dim_; ++i)
                    pos_[i] = rk4_affine(pos_[i], m.flow.p0[i], m.flow.p1[i], h);
                remaining -= h;
            }
            break;
        }
    }
    t_ = t;
}

void flow_position(const ModelSpec& m, const double* x0, double t,
                   const SolverOptions& opt, double* out) {
    StatePoint x = StatePoint::interior(
        std::vector<double>(x0, x0 + m.dimension));
    FlowCursor cur(m, x, opt);
    cur.advance_to(t);
    for (int i = 0; i < m.dimension; ++i) out[i] = cur.pos()[i];
}

} // namespace detail

void ControlPath::validate() const {
    if (breakpoints.size() != actions.size())
        throw std::invalid_argument("control path breakpoints/actions mismatch");
    if (breakpoints.empty())
        throw std::invalid_argument("control path must carry at least one segment");
    if (breakpoints.front() != 0.0)
        throw std::invalid_argument("control path must start at time 0");
    for (std::size_t i = 1; i < breakpoints.size(); ++i)
        if (!(breakpoints[i] > breakpoints[i - 1]))
            throw std::invalid_argument("control path breakpoints must increase");
    for (int a : actions)
        if (a < 0) throw std::invalid_argument("control path action index negative");
}

namespace {

// Exit time through the box faces for the closed-form families; +inf when the
// trajectory never reaches a face.  `hit_axis` reports the binding axis.
HitTime exact_hit_time(const ModelSpec& m, const StatePoint& x, int* hit_axis) {
    double best = std::numeric_limits<double>::infinity();
    int axis = -1;
    for (int i = 0; i < m.dimension; ++i) {
        double xi = x.coords[i], lo = m.lo[i], hi = m.hi[i];
        double t = std::numeric_limits<double>::infinity();
        if (m.flow.kind == FlowFamily::Kind::linear) {
            double v = m.flow.p0[i];
            if (v > 0.0)
                t = (hi - xi) / v;
            else if (v < 0.0)
                t = (lo - xi) / v;
        } else {  // exp_decay: monotone relaxation toward the center
            double c = m.flow.p0[i], kappa = m.flow.p1[i];
            if (c > hi) {
                t = (xi >= hi) ? 0.0 : -std::log((hi - c) / (xi - c)) / kappa;
            } else if (c < lo) {
                t = (xi <= lo) ? 0.0 : -std::log((lo - c) / (xi - c)) / kappa;
            }
            // Center inside the closed box: the coordinate never crosses.
        }
        if (t < best) {
            best = t;
            axis = i;
        }
    }
    if (hit_axis) *hit_axis = axis;
    if (std::isfinite(best)) return HitTime::at(std::max(best, 0.0));
    return HitTime::never(std::numeric_limits<double>::infinity());
}

} // namespace

HitTime hit_time(const ModelSpec& m, const StatePoint& x, const SolverOptions& opt) {
    if (static_cast<int>(x.coords.size()) != m.dimension)
        throw std::domain_error("state dimension mismatch");
    if (!m.inside_closed_box(x.coords.data()))
        throw std::domain_error("state outside the domain closure");

    if (m.flow.kind != FlowFamily::Kind::affine_ode)
        return exact_hit_time(m, x, nullptr);

    // Integrated flow: march one flow step at a time until the trajectory
    // leaves the closed box, then bisect inside the bracketing step.
    if (!m.inside_closed_box(x.coords.data(), 0.0)) return HitTime::at(0.0);
    detail::FlowCursor cur(m, x, opt);
    double t_prev = 0.0;
    std::vector<double> x_prev(x.coords);

    long steps = static_cast<long>(std::ceil(opt.t_cert / opt.delta_flow));
    for (long k = 1; k <= steps; ++k) {
        double t = std::min(opt.delta_flow * static_cast<double>(k), opt.t_cert);
        cur.advance_to(t);
        if (!m.inside_closed_box(cur.pos(), 0.0)) {
            // Bisect on [t_prev, t], re-integrating from the cached inside
            // point; the bracket is one flow step wide.
            double a = t_prev, b = t;
            StatePoint inside = StatePoint::interior(x_prev);
            while (b - a > 1e-10) {
                double mid = 0.5 * (a + b);
                detail::FlowCursor probe(m, inside, opt);
                probe.advance_to(mid - t_prev);
                if (m.inside_closed_box(probe.pos(), 0.0))
                    a = mid;
                else
                    b = mid;
            }
            return HitTime::at(0.5 * (a + b));
        }
        t_prev = t;
        for (int i = 0; i < m.dimension; ++i) x_prev[i] = cur.pos()[i];
    }
    return HitTime::never(opt.t_cert);
}

StatePoint flow_at(const ModelSpec& m, const StatePoint& x, double t,
                   const SolverOptions& opt) {
    if (t < 0.0) throw std::domain_error("flow time must be nonnegative");
    if (static_cast<int>(x.coords.size()) != m.dimension)
        throw std::domain_error("state dimension mismatch");
    if (!m.inside_closed_box(x.coords.data()))
        throw std::domain_error("state outside the domain closure");

    HitTime ht = hit_time(m, x, opt);
    bool at_boundary = ht.finite && t >= ht.t - 1e-12;
    if (ht.finite && t > ht.t + 1e-9)
        throw std::domain_error("flow time exceeds the boundary hit time");

    double t_eval = at_boundary ? ht.t : t;
    std::vector<double> pos(m.dimension);
    detail::flow_position(m, x.coords.data(), t_eval, opt, pos.data());

    if (at_boundary) {
        // Pin the binding coordinate exactly onto its face.
        int axis = -1;
        if (m.flow.kind != FlowFamily::Kind::affine_ode) {
            exact_hit_time(m, x, &axis);
        } else {
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m.dimension; ++i) {
                double d = std::min(std::abs(pos[i] - m.lo[i]),
                                    std::abs(pos[i] - m.hi[i]));
                if (d < best) {
                    best = d;
                    axis = i;
                }
            }
        }
        if (axis >= 0)
            pos[axis] = (std::abs(pos[axis] - m.hi[axis]) <=
                         std::abs(pos[axis] - m.lo[axis]))
                            ? m.hi[axis]
                            : m.lo[axis];
        for (int i = 0; i < m.dimension; ++i)
            pos[i] = std::clamp(pos[i], m.lo[i], m.hi[i]);
        return StatePoint::boundary(pos);
    }

    for (int i = 0; i < m.dimension; ++i) pos[i] = std::clamp(pos[i], m.lo[i], m.hi[i]);
    return StatePoint::interior(pos);
}

double hazard(const ModelSpec& m, const StatePoint& x, const ControlPath& path,
              double t, const SolverOptions& opt) {
    if (t < 0.0) throw std::domain_error("hazard horizon must be nonnegative");
    path.validate();
    for (int a : path.actions)
        if (a >= m.action_count())
            throw std::invalid_argument("control path action index out of range");
    HitTime ht = hit_time(m, x, opt);
    if (ht.finite && t > ht.t + 1e-9)
        throw std::domain_error("hazard horizon exceeds the boundary hit time");
    double t_end = ht.finite ? std::min(t, ht.t) : t;
    if (t_end <= 0.0) return 0.0;

    // Trapezoid along the flow, split at control breakpoints; segments on
    // which lambda(phi(x,s), a) is affine in s integrate exactly.
    bool affine_in_s = (m.flow.kind == FlowFamily::Kind::linear);
    detail::FlowCursor cur(m, x, opt);
    double sum = 0.0;

    std::vector<double> cuts{0.0};
    for (double b : path.breakpoints)
        if (b > 0.0 && b < t_end) cuts.push_back(b);
    cuts.push_back(t_end);
    std::sort(cuts.begin(), cuts.end());

    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        double s0 = cuts[seg], s1 = cuts[seg + 1];
        const ScalarFamily& rate = m.actions[path.action_at(s0)].rate;
        bool exact = affine_in_s || rate.kind == ScalarFamily::Kind::constant;
        long K = exact ? 1 : static_cast<long>(std::ceil((s1 - s0) / opt.delta_quad));
        cur.advance_to(s0);
        double prev = rate.eval(cur.pos(), m.dimension);
        for (long k = 1; k <= K; ++k) {
            double s = (k == K) ? s1
                                : s0 + (s1 - s0) * static_cast<double>(k) /
                                           static_cast<double>(K);
            double step = s - cur.time();
            cur.advance_to(s);
            double val = rate.eval(cur.pos(), m.dimension);
            sum += 0.5 * step * (prev + val);
            prev = val;
        }
    }
    return sum;
}

double check_semigroup(const ModelSpec& m, const std::vector<SemigroupSample>& samples,
                       const SolverOptions& opt) {
    double worst = 0.0;
    for (const SemigroupSample& s : samples) {
        if (s.t < 0.0 || s.s < 0.0)
            throw std::domain_error("semigroup sample times must be nonnegative");
        HitTime ht = hit_time(m, s.x, opt);
        if (ht.finite && s.t + s.s > ht.t + 1e-12)
            throw std::domain_error("semigroup sample exceeds the boundary hit time");

        std::vector<double> direct(m.dimension), mid(m.dimension), two(m.dimension);
        detail::flow_position(m, s.x.coords.data(), s.t + s.s, opt, direct.data());
        detail::flow_position(m, s.x.coords.data(), s.t, opt, mid.data());
        detail::flow_position(m, mid.data(), s.s, opt, two.data());
        for (int i = 0; i < m.dimension; ++i)
            worst = std::max(worst, std::abs(direct[i] - two[i]));
    }
    return worst;
}

} // namespace pdmp
