#include "glab/green.hpp"
#include "glab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace glab {

double min_resolvable_radius(const Mesh& mesh) {
    return 2.0 * std::max(mesh.h_max(), std::sqrt(mesh.tau()));
}

namespace {

int cylinder_steps(const Mesh& mesh, double r) {
    return static_cast<int>(std::floor(r * r / mesh.tau() + 1e-9));
}

void require_resolvable(const Mesh& mesh, double r, const char* what) {
    if (!(r >= min_resolvable_radius(mesh) * (1.0 - 1e-12)))
        throw PreconditionError(std::string(what) +
                                ": radius below resolution (needs >= 2 max(h, sqrt(tau)))");
}

Cylinder make_cylinder(const Mesh& mesh, GridPoint pole, double r, bool backward) {
    Cylinder cyl;
    cyl.cells = mesh.ball(mesh.center(pole.cell), r);
    const int m = cylinder_steps(mesh, r);
    if (backward) {
        cyl.k_first = pole.k - m;
        cyl.k_last = pole.k - 1;
    } else {
        cyl.k_first = pole.k + 1;
        cyl.k_last = pole.k + m;
    }
    cyl.measure = m * mesh.tau() * static_cast<double>(cyl.cells.size()) * mesh.cell_volume();
    if (cyl.cells.empty() || m < 1) throw PreconditionError("cylinder contains no grid cells");
    return cyl;
}

Source cylinder_source(const Cylinder& cyl, int N, int component, Eigen::Index size) {
    Slice load = Slice::Zero(size);
    for (int c : cyl.cells) load[static_cast<Eigen::Index>(c) * N + component] = 1.0 / cyl.measure;
    return [load, first = cyl.k_first, last = cyl.k_last](int k) -> std::optional<Slice> {
        if (k < first || k > last) return std::nullopt;
        return load;
    };
}

void check_component(int component, int N) {
    if (component < 0 || component >= N) throw PreconditionError("column index out of range");
}

} // namespace

Cylinder backward_cylinder(const Mesh& mesh, GridPoint pole, double rho) {
    return make_cylinder(mesh, pole, rho, true);
}

Cylinder forward_cylinder(const Mesh& mesh, GridPoint pole, double sigma) {
    return make_cylinder(mesh, pole, sigma, false);
}

double GreenColumn::value(int k, int cell, int component) const {
    if (k < field.k_begin) {
        if (!backward) return 0.0;
        throw PreconditionError("transpose column was not computed that far back");
    }
    if (k > field.k_end()) {
        if (backward) return 0.0;
        throw PreconditionError("green column was not computed that far ahead");
    }
    return field.value(k, cell, component);
}

Eigen::VectorXd GreenColumn::vector(int k, int cell) const {
    Eigen::VectorXd v(field.N);
    for (int j = 0; j < field.N; ++j) v[j] = value(k, cell, j);
    return v;
}

double GreenColumn::average(const Cylinder& cyl, int component) const {
    double sum = 0.0;
    for (int k = cyl.k_first; k <= cyl.k_last; ++k)
        for (int c : cyl.cells) sum += value(k, c, component);
    const Mesh& mesh = field.mesh;
    return sum * mesh.tau() * mesh.cell_volume() / cyl.measure;
}

GreenColumn averaged_green_column(const ThetaStepper& stepper, GridPoint pole, int column,
                                  double rho, int k_T) {
    const Mesh& mesh = stepper.mesh();
    check_component(column, stepper.N());
    require_resolvable(mesh, rho, "averaged_green_column");
    if (k_T <= pole.k) throw PreconditionError("averaged_green_column: need T > s");
    const Cylinder cyl = backward_cylinder(mesh, pole, rho);
    if (cyl.k_first < 0)
        throw PreconditionError("averaged_green_column: s - rho^2 lies before the mesh time origin");

    return GreenColumn{pole, mesh.center(pole.cell), mesh.time(pole.k), column, rho, false,
                       solve_forward(stepper, Slice::Zero(stepper.slice_size()),
                                     cylinder_source(cyl, stepper.N(), column, stepper.slice_size()),
                                     cyl.k_first, k_T)};
}

GreenColumn transpose_green_column(const ThetaStepper& stepper, GridPoint pole, int column,
                                   double sigma, int k_S) {
    const Mesh& mesh = stepper.mesh();
    check_component(column, stepper.N());
    require_resolvable(mesh, sigma, "transpose_green_column");
    if (k_S >= pole.k) throw PreconditionError("transpose_green_column: need S < t");
    if (k_S < 0) throw PreconditionError("transpose_green_column: S lies before the mesh time origin");
    const Cylinder cyl = forward_cylinder(mesh, pole, sigma);

    return GreenColumn{pole, mesh.center(pole.cell), mesh.time(pole.k), column, sigma, true,
                       solve_backward(stepper, Slice::Zero(stepper.slice_size()),
                                      cylinder_source(cyl, stepper.N(), column, stepper.slice_size()),
                                      k_S, cyl.k_last)};
}

GreenColumn cell_green_column(const ThetaStepper& stepper, GridPoint pole, int column, int k_T) {
    const Mesh& mesh = stepper.mesh();
    check_component(column, stepper.N());
    if (k_T <= pole.k) throw PreconditionError("cell_green_column: need T > s");
    Slice g = Slice::Zero(stepper.slice_size());
    g[static_cast<Eigen::Index>(pole.cell) * stepper.N() + column] = 1.0 / mesh.cell_volume();

    // The slice at s carries the discrete delta, not a value of Gamma(t > s).
    return GreenColumn{pole, mesh.center(pole.cell), mesh.time(pole.k), column, 0.0, false,
                       solve_forward(stepper, g, no_source(), pole.k, k_T)};
}

Propagator propagator(const ThetaStepper& stepper, int k_from, int k_to, Eigen::Index cap) {
    const Eigen::Index S = stepper.slice_size();
    if (k_to < k_from) throw PreconditionError("propagator: need t >= s");
    if (S > cap) throw PreconditionError("propagator: slice size exceeds the dense propagator cap");
    Propagator P;
    P.k_from = k_from;
    P.k_to = k_to;
    P.volume = stepper.mesh().cell_volume();
    P.matrix = Eigen::MatrixXd::Identity(S, S);
    for (int k = k_from; k < k_to; ++k)
        for (Eigen::Index c = 0; c < S; ++c) P.matrix.col(c) = stepper.step(P.matrix.col(c), k);
    return P;
}

double extrapolate_rho2(const std::vector<double>& rhos, const std::vector<double>& values) {
    if (rhos.size() != values.size() || rhos.empty())
        throw PreconditionError("extrapolate_rho2: mismatched inputs");
    if (rhos.size() == 1) return values.front();
    double sx = 0, sxx = 0, sv = 0, sxv = 0;
    const double m = static_cast<double>(rhos.size());
    for (std::size_t i = 0; i < rhos.size(); ++i) {
        const double x = rhos[i] * rhos[i];
        sx += x;
        sxx += x * x;
        sv += values[i];
        sxv += x * values[i];
    }
    return (sxx * sv - sx * sxv) / (m * sxx - sx * sx);
}

namespace {

// Solve (r1^p - r2^p) / (r2^p - r3^p) = ratio for p by bisection.
double observed_order(double r1, double r2, double r3, double ratio) {
    auto g = [&](double p) {
        return (std::pow(r1, p) - std::pow(r2, p)) / (std::pow(r2, p) - std::pow(r3, p));
    };
    double lo = 1e-3, hi = 12.0;
    if (!(ratio > g(lo)) || !(ratio < g(hi))) return std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < ratio ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

RhoRefinement rho_refinement(const ThetaStepper& stepper, GridPoint pole, int column, int component,
                             const std::vector<double>& rho_list,
                             const std::vector<GridPoint>& probes) {
    const Mesh& mesh = stepper.mesh();
    if (rho_list.empty() || probes.empty())
        throw PreconditionError("rho_refinement: need radii and probes");
    for (std::size_t i = 1; i < rho_list.size(); ++i)
        if (!(rho_list[i] < rho_list[i - 1]))
            throw PreconditionError("rho_refinement: rho_list must be strictly decreasing");
    const double rho_max = rho_list.front();
    int k_T = pole.k + 1;
    const Point y = mesh.center(pole.cell);
    for (const auto& p : probes) {
        const double dist = parabolic_distance(mesh.time(p.k), mesh.distance(p.cell, y), mesh.time(pole.k));
        if (p.k <= pole.k || !(dist > 3.0 * rho_max))
            throw PreconditionError("rho_refinement: probes must satisfy |X - Y|_p > 3 max(rho), t > s");
        k_T = std::max(k_T, p.k);
    }

    RhoRefinement out;
    out.rhos = rho_list;
    for (double rho : rho_list) {
        const GreenColumn col = averaged_green_column(stepper, pole, column, rho, k_T);
        std::vector<double> row;
        row.reserve(probes.size());
        for (const auto& p : probes) row.push_back(col.value(p.k, p.cell, component));
        out.values.push_back(std::move(row));
    }
    out.extrapolated.resize(probes.size());
    std::vector<double> column_values(rho_list.size());
    for (std::size_t p = 0; p < probes.size(); ++p) {
        for (std::size_t r = 0; r < rho_list.size(); ++r) column_values[r] = out.values[r][p];
        out.extrapolated[p] = extrapolate_rho2(rho_list, column_values);
    }

    std::vector<double> diffs;  // sup over probes of successive differences
    for (std::size_t r = 1; r < rho_list.size(); ++r) {
        double d = 0.0;
        for (std::size_t p = 0; p < probes.size(); ++p)
            d = std::max(d, std::abs(out.values[r][p] - out.values[r - 1][p]));
        diffs.push_back(d);
    }
    for (std::size_t i = 1; i < diffs.size(); ++i)
        if (diffs[i] > diffs[i - 1]) out.monotone = false;
    out.observed_order = std::numeric_limits<double>::quiet_NaN();
    if (rho_list.size() >= 3) {
        const std::size_t m = rho_list.size();
        const double d12 = diffs[m - 3];
        const double d23 = diffs[m - 2];
        if (d23 > 0.0) out.observed_order = observed_order(rho_list[m - 3], rho_list[m - 2], rho_list[m - 1], d12 / d23);
    }
    if (!out.monotone) out.diagnostic = "non-monotone convergence in rho";
    return out;
}

Trajectory apply_representation(const ThetaStepper& stepper, const Source& f, int k_start,
                                int k_end) {
    if (k_end <= k_start) throw PreconditionError("apply_representation: empty window");
    const Eigen::Index S = stepper.slice_size();
    Trajectory out{stepper.mesh(), stepper.N(), k_start,
                   std::vector<Slice>(static_cast<std::size_t>(k_end - k_start + 1), Slice::Zero(S))};
    const double tau = stepper.mesh().tau();
    for (int j = k_start; j < k_end; ++j) {
        auto load = f(j);
        if (!load) continue;
        Slice v = tau * *load;
        for (int k = j; k < k_end; ++k) {
            v = stepper.step(v, k);
            out.slices[static_cast<std::size_t>(k + 1 - k_start)] += v;
        }
    }
    return out;
}

Slice apply_initial(const ThetaStepper& stepper, const Slice& g, int k_s, int k_t) {
    if (k_t <= k_s) throw PreconditionError("apply_initial: need t > s");
    if (g.size() != stepper.slice_size()) throw PreconditionError("apply_initial: wrong slice size");
    const Propagator P = propagator(stepper, k_s, k_t);
    return P.matrix * g;
}

} // namespace glab
