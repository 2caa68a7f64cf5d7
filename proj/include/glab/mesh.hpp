#pragma once

#include "glab/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <vector>

namespace glab {

/// One time slice: N components per cell, cell-major (cell * N + component).
using Slice = Eigen::VectorXd;

/// Uniform grid over a Domain plus an arithmetic time grid t_k = t0 + k tau.
///
/// Periodic axes carry `cells` nodes at lo + i h with h = length / cells.
/// Dirichlet axes carry `cells` interior nodes at lo + (i + 1) h with
/// h = length / (cells + 1); the boundary nodes hold zero and are not stored.
class Mesh {
public:
    Mesh(Domain domain, std::array<int, 2> cells, double tau, double t0 = 0.0);

    const Domain& domain() const noexcept { return domain_; }
    int dim() const noexcept { return domain_.n; }
    BoundaryMode boundary_mode() const noexcept { return domain_.mode; }
    bool periodic() const noexcept { return domain_.mode == BoundaryMode::periodic; }

    int cells(int axis) const noexcept { return cells_[axis]; }
    int num_cells() const noexcept { return num_cells_; }
    double h(int axis) const noexcept { return h_[axis]; }
    double h_max() const noexcept;
    double cell_volume() const noexcept { return volume_; }
    double tau() const noexcept { return tau_; }
    double t0() const noexcept { return t0_; }

    double time(int k) const noexcept { return t0_ + k * tau_; }
    /// Index of the grid time equal to t; throws PreconditionError when t is
    /// off the grid by more than 1e-9 tau.
    int time_index(double t) const;

    int cell_index(int ix, int iy = 0) const noexcept { return iy * cells_[0] + ix; }
    std::array<int, 2> coords(int cell) const noexcept {
        return {cell % cells_[0], cell / cells_[0]};
    }
    Point center(int cell) const noexcept;
    /// Neighbor along `axis` at `offset`; -1 when it falls on a Dirichlet
    /// boundary node or beyond.
    int neighbor(int cell, int axis, int offset) const noexcept;
    int nearest_cell(const Point& x) const;

    /// Displacement x_cell - y and its length (minimum image on a torus).
    Point displacement(int cell, const Point& y) const { return domain_.displacement(center(cell), y); }
    double distance(int cell, const Point& y) const { return domain_.distance(center(cell), y); }

    /// Cells whose center lies strictly within `radius` of y.
    std::vector<int> ball(const Point& y, double radius) const;

    /// Same domain and time grid with every axis refined by `factor`
    /// (periodic: cells * factor; Dirichlet: (cells + 1) * factor - 1) and
    /// tau divided by `tau_factor`.
    Mesh refined(int factor, int tau_factor) const;

private:
    Domain domain_;
    std::array<int, 2> cells_{1, 1};
    std::array<double, 2> h_{1.0, 1.0};
    int num_cells_ = 1;
    double volume_ = 1.0;
    double tau_;
    double t0_;
};

} // namespace glab
