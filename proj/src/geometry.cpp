#include "glab/geometry.hpp"
#include "glab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace glab {

std::string to_string(BoundaryMode mode) {
    return mode == BoundaryMode::periodic ? "periodic" : "dirichlet";
}

BoundaryMode boundary_mode_from_string(const std::string& name) {
    if (name == "periodic") return BoundaryMode::periodic;
    if (name == "dirichlet") return BoundaryMode::dirichlet;
    throw ParseError("unknown boundary mode '" + name + "' (expected periodic or dirichlet)");
}

double Domain::volume() const {
    double v = 1.0;
    for (int a = 0; a < n; ++a) v *= length(a);
    return v;
}

double Domain::dist_to_boundary(const Point& x) const {
    if (mode == BoundaryMode::periodic) return kInfinity;
    double d = kInfinity;
    for (int a = 0; a < n; ++a) d = std::min({d, x[a] - lo[a], hi[a] - x[a]});
    return std::max(d, 0.0);
}

Point Domain::displacement(const Point& x, const Point& y) const {
    Point d{0.0, 0.0};
    for (int a = 0; a < n; ++a) {
        double v = x[a] - y[a];
        if (mode == BoundaryMode::periodic) {
            const double L = length(a);
            v -= L * std::round(v / L);
        }
        d[a] = v;
    }
    return d;
}

double Domain::distance(const Point& x, const Point& y) const {
    const Point d = displacement(x, y);
    double s = 0.0;
    for (int a = 0; a < n; ++a) s += d[a] * d[a];
    return std::sqrt(s);
}

void Domain::validate() const {
    if (n < 1 || n > kMaxDim) throw PreconditionError("spatial dimension must be 1 or 2");
    for (int a = 0; a < n; ++a) {
        if (!(hi[a] > lo[a]) || !std::isfinite(lo[a]) || !std::isfinite(hi[a]))
            throw PreconditionError("domain box must have finite hi > lo on every axis");
    }
}

} // namespace glab
