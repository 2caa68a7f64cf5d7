#pragma once

#include "glab/solver.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace glab {

/// A space-time grid point: time index and cell.
struct GridPoint {
    int k = 0;
    int cell = 0;
};

/// Discrete space-time cylinder: the cells of a ball and the slices that
/// carry the cylinder's measure.
struct Cylinder {
    std::vector<int> cells;
    int k_first = 0;  ///< first slice of the cylinder
    int k_last = 0;   ///< last slice (inclusive)
    double measure = 0.0;

    int slice_count() const noexcept { return k_last - k_first + 1; }
};

/// Backward cylinder (s - rho^2, s) x B_rho(y): slices k_s - m .. k_s - 1,
/// m = floor(rho^2 / tau). Clipped to the domain in Dirichlet mode.
Cylinder backward_cylinder(const Mesh& mesh, GridPoint pole, double rho);
/// Forward cylinder (t, t + sigma^2) x B_sigma(x): slices k_t + 1 .. k_t + m.
Cylinder forward_cylinder(const Mesh& mesh, GridPoint pole, double sigma);

/// Smallest resolvable mollification radius, 2 max(h, sqrt(tau)).
double min_resolvable_radius(const Mesh& mesh);

/// One column of an averaged Green matrix sampled on the grid.
/// Forward columns vanish before `field.k_begin`; backward columns vanish
/// after `field.k_end()`.
struct GreenColumn {
    GridPoint pole;
    Point pole_x{0.0, 0.0};
    double pole_t = 0.0;
    int column = 0;
    double rho = 0.0;   ///< 0 marks the cell limit (unit mass in one cell)
    bool backward = false;
    Trajectory field;

    /// Value of component j at (k, cell), honoring the zero extension.
    double value(int k, int cell, int component) const;
    Eigen::VectorXd vector(int k, int cell) const;
    /// Cylinder average of component j.
    double average(const Cylinder& cyl, int component) const;
};

/// Gamma^rho(., Y) e_k: forward solve with the normalized indicator of the
/// backward cylinder at Y as source, from zero at s - rho^2 up to k_T.
GreenColumn averaged_green_column(const ThetaStepper& stepper, GridPoint pole, int column,
                                  double rho, int k_T);

/// tGamma^sigma(., X) e_k: the adjoint solve with the normalized indicator of
/// the forward cylinder at X as source, down to k_S.
GreenColumn transpose_green_column(const ThetaStepper& stepper, GridPoint pole, int column,
                                   double sigma, int k_S);

/// Cell-limit column: unit mass e_k / h^n placed at the pole cell at slice
/// k_s and evolved to k_T. Its entries are the propagator column / h^n.
GreenColumn cell_green_column(const ThetaStepper& stepper, GridPoint pole, int column, int k_T);

inline constexpr Eigen::Index kPropagatorCap = 4000;

/// Dense solution operator P(t_b, t_a) of the scheme with zero source.
struct Propagator {
    int k_from = 0;
    int k_to = 0;
    double volume = 1.0;
    Eigen::MatrixXd matrix;

    /// Green sample Gamma_h(t, x, s, y)_{ij} = P / h^n.
    double green(int x_cell, int i, int y_cell, int j, int N) const {
        return matrix(static_cast<Eigen::Index>(x_cell) * N + i,
                      static_cast<Eigen::Index>(y_cell) * N + j) / volume;
    }
};

Propagator propagator(const ThetaStepper& stepper, int k_from, int k_to,
                      Eigen::Index cap = kPropagatorCap);

struct RhoRefinement {
    std::vector<double> rhos;
    /// values[r][p]: Gamma^rho_r at probe p (component `component`).
    std::vector<std::vector<double>> values;
    std::vector<double> extrapolated;
    /// Observed convergence order from the three finest radii (NaN if fewer).
    double observed_order = 0.0;
    bool monotone = true;
    std::string diagnostic;
};

/// Samples Gamma^rho at the probes for every rho and extrapolates to rho = 0
/// with the model Gamma^rho = Gamma + c rho^2 (least squares over the list).
RhoRefinement rho_refinement(const ThetaStepper& stepper, GridPoint pole, int column,
                             int component, const std::vector<double>& rho_list,
                             const std::vector<GridPoint>& probes);

/// Least-squares fit v = v0 + c rho^2; returns v0.
double extrapolate_rho2(const std::vector<double>& rhos, const std::vector<double>& values);

/// Representation by superposition of propagated sources:
/// u_k = sum_{j < k} P(t_k, t_j) tau f_j.
Trajectory apply_representation(const ThetaStepper& stepper, const Source& f, int k_start,
                                int k_end);

/// u(t) = P(t, s) g via the dense propagator.
Slice apply_initial(const ThetaStepper& stepper, const Slice& g, int k_s, int k_t);

} // namespace glab
