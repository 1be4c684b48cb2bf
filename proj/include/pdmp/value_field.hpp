#pragma once

#include <string>
#include <vector>

#include "pdmp/model.hpp"

namespace pdmp {

// Piecewise-linear scalar field over a 1-D interior grid, defined on the
// closed domain box: between nodes it interpolates, and on the two edge
// segments (box face to extreme node) it continues the adjacent segment's
// slope.  Evaluation outside the box is an error — no clamping anywhere.
// Boundary values are a separate finite table keyed by reachable boundary
// points (outputs of the one-stage boundary minimization, kept for export).
class ValueField {
  public:
    ValueField() = default;
    ValueField(Grid grid, std::vector<double> values, double box_lo, double box_hi);

    static ValueField constant(const Grid& grid, double c, double box_lo,
                               double box_hi);
    static ValueField constant(const ModelSpec& m, const Grid& grid, double c);

    double eval(double x) const;
    double eval(const StatePoint& p) const { return eval(p.coords.at(0)); }

    const Grid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    double box_lo() const { return lo_; }
    double box_hi() const { return hi_; }

    void set_boundary_value(double z, double v);
    // Throws std::domain_error when z matches no stored boundary point.
    double boundary_value(double z) const;
    const std::vector<std::pair<double, double>>& boundary_values() const {
        return boundary_;
    }

    // sup-norm distance on shared nodes.
    double sup_delta(const ValueField& other) const;

    // CSV round trip: header "kind,x,value", rows kind=node|boundary, numbers
    // rendered with 17 significant digits (exact double round trip).
    std::string to_csv() const;
    static ValueField from_csv(const std::string& text, double box_lo,
                               double box_hi);

  private:
    Grid grid_;
    std::vector<double> values_;
    std::vector<std::pair<double, double>> boundary_;  // (coordinate, value)
    double lo_ = 0.0, hi_ = 1.0;
};

// Canonical 17-significant-digit rendering used by every CSV artifact.
std::string fmt_g17(double v);

} // namespace pdmp
