#include "glab/mesh.hpp"
#include "glab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace glab {

Mesh::Mesh(Domain domain, std::array<int, 2> cells, double tau, double t0)
    : domain_(domain), tau_(tau), t0_(t0) {
    domain_.validate();
    if (!(tau > 0.0) || !std::isfinite(tau)) throw PreconditionError("mesh: tau must be positive");
    num_cells_ = 1;
    volume_ = 1.0;
    for (int a = 0; a < domain_.n; ++a) {
        if (cells[a] < 4) throw PreconditionError("mesh: at least 4 cells per axis are required");
        cells_[a] = cells[a];
        h_[a] = periodic() ? domain_.length(a) / cells[a] : domain_.length(a) / (cells[a] + 1);
        num_cells_ *= cells[a];
        volume_ *= h_[a];
    }
}

double Mesh::h_max() const noexcept {
    double h = 0.0;
    for (int a = 0; a < dim(); ++a) h = std::max(h, h_[a]);
    return h;
}

int Mesh::time_index(double t) const {
    const double k = (t - t0_) / tau_;
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-9) throw PreconditionError("time is not on the mesh time grid");
    return static_cast<int>(r);
}

Point Mesh::center(int cell) const noexcept {
    const auto ij = coords(cell);
    Point x{0.0, 0.0};
    for (int a = 0; a < dim(); ++a)
        x[a] = domain_.lo[a] + (periodic() ? ij[a] : ij[a] + 1) * h_[a];
    return x;
}

int Mesh::neighbor(int cell, int axis, int offset) const noexcept {
    auto ij = coords(cell);
    int v = ij[axis] + offset;
    if (periodic()) {
        v %= cells_[axis];
        if (v < 0) v += cells_[axis];
    } else if (v < 0 || v >= cells_[axis]) {
        return -1;
    }
    ij[axis] = v;
    return cell_index(ij[0], dim() == 2 ? ij[1] : 0);
}

int Mesh::nearest_cell(const Point& x) const {
    std::array<int, 2> ij{0, 0};
    for (int a = 0; a < dim(); ++a) {
        double u = (x[a] - domain_.lo[a]) / h_[a];
        if (!periodic()) u -= 1.0;
        int i = static_cast<int>(std::lround(u));
        if (periodic()) {
            i %= cells_[a];
            if (i < 0) i += cells_[a];
        } else {
            i = std::clamp(i, 0, cells_[a] - 1);
        }
        ij[a] = i;
    }
    return cell_index(ij[0], ij[1]);
}

std::vector<int> Mesh::ball(const Point& y, double radius) const {
    std::vector<int> out;
    for (int c = 0; c < num_cells_; ++c)
        if (distance(c, y) < radius) out.push_back(c);
    return out;
}

Mesh Mesh::refined(int factor, int tau_factor) const {
    if (factor < 1 || tau_factor < 1) throw PreconditionError("mesh: refinement factors must be >= 1");
    std::array<int, 2> cells{1, 1};
    for (int a = 0; a < dim(); ++a)
        cells[a] = periodic() ? cells_[a] * factor : (cells_[a] + 1) * factor - 1;
    return Mesh(domain_, cells, tau_ / tau_factor, t0_);
}

} // namespace glab
