#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace glab {

/// Spatial point; only the first `n` entries are meaningful (n <= 2).
using Point = std::array<double, 2>;

inline constexpr int kMaxDim = 2;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class BoundaryMode { dirichlet, periodic };

std::string to_string(BoundaryMode mode);
BoundaryMode boundary_mode_from_string(const std::string& name);

/// Axis-aligned box with a boundary treatment.
struct Domain {
    int n = 1;
    Point lo{0.0, 0.0};
    Point hi{1.0, 1.0};
    BoundaryMode mode = BoundaryMode::periodic;

    double length(int axis) const { return hi[axis] - lo[axis]; }
    double volume() const;

    /// Distance to the boundary; +inf on a torus.
    double dist_to_boundary(const Point& x) const;

    /// Euclidean distance, taking the minimum image on a torus.
    double distance(const Point& x, const Point& y) const;

    /// Signed displacement x - y per axis (minimum image on a torus).
    Point displacement(const Point& x, const Point& y) const;

    void validate() const;
};

/// max(sqrt|t - s|, |x - y|)
inline double parabolic_distance(double t, double dx, double s) {
    return std::max(std::sqrt(std::abs(t - s)), dx);
}

} // namespace glab
