#include "pdmp/value_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace pdmp {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

ValueField::ValueField(Grid grid, std::vector<double> values, double box_lo,
                       double box_hi)
    : grid_(std::move(grid)), values_(std::move(values)), lo_(box_lo), hi_(box_hi) {
    if (grid_.size() < 2)
        throw std::invalid_argument("value field needs at least 2 grid nodes");
    if (values_.size() != grid_.nodes.size())
        throw std::invalid_argument("value field size mismatch");
    for (int i = 1; i < grid_.size(); ++i)
        if (!(grid_[i] > grid_[i - 1]))
            throw std::invalid_argument("value field grid must increase");
    if (!(lo_ < grid_.nodes.front()) || !(hi_ > grid_.nodes.back()))
        throw std::invalid_argument("value field box must contain the grid");
}

ValueField ValueField::constant(const Grid& grid, double c, double lo, double hi) {
    return ValueField(grid, std::vector<double>(grid.nodes.size(), c), lo, hi);
}

ValueField ValueField::constant(const ModelSpec& m, const Grid& grid, double c) {
    return constant(grid, c, m.lo[0], m.hi[0]);
}

double ValueField::eval(double x) const {
    if (x < lo_ - 1e-12 || x > hi_ + 1e-12)
        throw std::domain_error("value field evaluated outside the domain box");
    // Piecewise linear between nodes; the edge segments extend linearly to the
    // box faces so kernel atoms near (but inside) the faces stay evaluable.
    const std::vector<double>& xs = grid_.nodes;
    int n = grid_.size();
    int hi_idx;
    if (x <= xs.front())
        hi_idx = 1;
    else if (x >= xs.back())
        hi_idx = n - 1;
    else
        hi_idx = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) -
                                  xs.begin());
    int lo_idx = hi_idx - 1;
    double w = (x - xs[lo_idx]) / (xs[hi_idx] - xs[lo_idx]);
    // Two-coefficient form: inside the hull both weights are nonnegative, so
    // the value is a convex combination and evaluation is exactly monotone in
    // the node values (the solver's monotonicity guarantees rely on this).
    return (1.0 - w) * values_[lo_idx] + w * values_[hi_idx];
}

void ValueField::set_boundary_value(double z, double v) {
    for (auto& [pos, val] : boundary_) {
        if (pos == z) {
            val = v;
            return;
        }
    }
    boundary_.emplace_back(z, v);
    std::sort(boundary_.begin(), boundary_.end());
}

double ValueField::boundary_value(double z) const {
    for (const auto& [pos, val] : boundary_)
        if (pos == z) return val;
    throw std::domain_error("no stored boundary value at the given point");
}

double ValueField::sup_delta(const ValueField& other) const {
    if (values_.size() != other.values_.size())
        throw std::invalid_argument("value field size mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i)
        d = std::max(d, std::abs(values_[i] - other.values_[i]));
    return d;
}

std::string ValueField::to_csv() const {
    std::ostringstream os;
    os << "kind,x,value\n";
    for (int i = 0; i < grid_.size(); ++i)
        os << "node," << fmt_g17(grid_[i]) << "," << fmt_g17(values_[i]) << "\n";
    for (const auto& [pos, val] : boundary_)
        os << "boundary," << fmt_g17(pos) << "," << fmt_g17(val) << "\n";
    return os.str();
}

ValueField ValueField::from_csv(const std::string& text, double lo, double hi) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("kind,x,value", 0) != 0)
        throw std::invalid_argument("value field CSV missing header");
    Grid g;
    std::vector<double> vals;
    std::vector<std::pair<double, double>> bvals;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(in.eof() && line.back() == '\r'
                                   ? line.substr(0, line.size() - 1)
                                   : line);
        std::string kind, xs, vs;
        if (!std::getline(row, kind, ',') || !std::getline(row, xs, ',') ||
            !std::getline(row, vs))
            throw std::invalid_argument("malformed value field CSV row: " + line);
        double x = std::strtod(xs.c_str(), nullptr);
        double v = std::strtod(vs.c_str(), nullptr);
        if (kind == "node") {
            g.nodes.push_back(x);
            vals.push_back(v);
        } else if (kind == "boundary") {
            bvals.emplace_back(x, v);
        } else {
            throw std::invalid_argument("unknown value field CSV kind: " + kind);
        }
    }
    ValueField f(std::move(g), std::move(vals), lo, hi);
    for (const auto& [pos, val] : bvals) f.set_boundary_value(pos, val);
    return f;
}

} // namespace pdmp
