#include "glab/verify.hpp"
#include "glab/discrete_operator.hpp"
#include "glab/errors.hpp"
#include "glab/kernel.hpp"
#include "glab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace glab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

CheckRecord make_record(std::string name, std::string anchor, double tolerance) {
    CheckRecord r;
    r.name = std::move(name);
    r.anchor = std::move(anchor);
    r.tolerance = tolerance;
    return r;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double dot_weighted(const Mesh& mesh, const Slice& a, const Slice& b) {
    return mesh.cell_volume() * a.dot(b);
}

double vector_norm_at(const Slice& u, int cell, int N) {
    return u.segment(static_cast<Eigen::Index>(cell) * N, N).norm();
}

} // namespace

std::string to_string(Status status) {
    switch (status) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::informational: return "informational";
    }
    return "unknown";
}

bool VerificationReport::all_passed() const { return failures() == 0; }

std::size_t VerificationReport::failures() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                  [](const CheckRecord& r) { return !r.passed(); }));
}

BoundFit fit_power_law(std::span<const double> xs, std::span<const double> ys) {
    BoundFit fit;
    fit.exponent = kNaN;
    fit.constant = kNaN;
    fit.r2 = kNaN;
    std::vector<double> lx, ly;
    fit.x_min = std::numeric_limits<double>::infinity();
    fit.x_max = 0.0;
    for (std::size_t i = 0; i < std::min(xs.size(), ys.size()); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
        fit.samples.emplace_back(xs[i], ys[i]);
        lx.push_back(std::log(xs[i]));
        ly.push_back(std::log(ys[i]));
        fit.x_min = std::min(fit.x_min, xs[i]);
        fit.x_max = std::max(fit.x_max, xs[i]);
    }
    if (lx.size() < 2) return fit;
    const double m = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / m;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / m;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx <= 0.0) return fit;
    fit.exponent = sxy / sxx;
    fit.constant = std::exp(my - fit.exponent * mx);
    fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

double op_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
    if (m.rows() == 2 && m.cols() == 2) {
        const double s = m.squaredNorm();
        const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        const double disc = std::sqrt(std::max(0.0, s * s - 4.0 * det * det));
        return std::sqrt(0.5 * (s + disc));
    }
    const Eigen::MatrixXd g = m.transpose() * m;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(g.cols()).normalized();
    double est = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd w = g * v;
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        w /= nw;
        const double prev = est;
        est = nw;
        v = w;
        if (std::abs(est - prev) <= 1e-10 * est) break;
    }
    return std::sqrt(est);
}

Eigen::MatrixXd GreenBlock::matrix(int k, int cell) const {
    const int n = N();
    Eigen::MatrixXd m(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) m(i, j) = columns[static_cast<std::size_t>(j)].value(k, cell, i);
    return m;
}

GreenBlock green_block(const ThetaStepper& stepper, GridPoint pole, double rho, int k_T) {
    GreenBlock block;
    for (int j = 0; j < stepper.N(); ++j)
        block.columns.push_back(rho == 0.0 ? cell_green_column(stepper, pole, j, k_T)
                                           : averaged_green_column(stepper, pole, j, rho, k_T));
    return block;
}

// ---------------------------------------------------------------------------
// Exact identities

std::vector<DualityCase> make_duality_cases(const Mesh& mesh, int N, int count,
                                            std::span<const double> rhos,
                                            std::span<const double> sigmas, int k_lo, int k_hi,
                                            std::uint64_t seed) {
    if (rhos.empty() || sigmas.empty() || count <= 0)
        throw PreconditionError("make_duality_cases: need radii and a positive count");
    std::mt19937_64 rng(seed);
    auto uniform = [&](int lo, int hi) {
        if (hi < lo) throw PreconditionError("make_duality_cases: time window too short for radii");
        return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    std::vector<DualityCase> cases;
    for (int i = 0; i < count; ++i) {
        DualityCase c;
        c.rho = rhos[static_cast<std::size_t>(i) % rhos.size()];
        c.sigma = sigmas[(static_cast<std::size_t>(i) / rhos.size()) % sigmas.size()];
        c.k = i % N;
        c.l = (i / N) % N;
        const int m_rho = static_cast<int>(std::floor(c.rho * c.rho / mesh.tau() + 1e-9));
        const int m_sigma = static_cast<int>(std::floor(c.sigma * c.sigma / mesh.tau() + 1e-9));
        c.Y.k = uniform(k_lo + m_rho, k_hi - m_sigma - 1);
        c.X.k = uniform(c.Y.k, k_hi - m_sigma);
        c.Y.cell = uniform(0, mesh.num_cells() - 1);
        c.X.cell = uniform(0, mesh.num_cells() - 1);
        cases.push_back(c);
    }
    return cases;
}

CheckRecord check_duality(const ThetaStepper& stepper, std::span<const DualityCase> cases,
                          double tolerance, int jobs) {
    CheckRecord rec = make_record("duality", "averaged-duality", tolerance);
    rec.columns = {"case", "y_k", "y_cell", "x_k", "x_cell", "rho", "sigma", "k", "l", "forward",
                   "transpose", "residual"};
    std::vector<std::vector<double>> rows(cases.size());
    const int workers = std::max(1, jobs);
    std::vector<ThetaStepper> copies(static_cast<std::size_t>(std::min<std::size_t>(
                                         cases.size(), static_cast<std::size_t>(workers))),
                                     stepper);
    const Mesh& mesh = stepper.mesh();
    parallel_for(cases.size(), workers, [&](std::size_t i, int w) {
        const ThetaStepper& st = copies[static_cast<std::size_t>(w)];
        const DualityCase& c = cases[i];
        const Cylinder qx = forward_cylinder(mesh, c.X, c.sigma);
        const Cylinder qy = backward_cylinder(mesh, c.Y, c.rho);
        const GreenColumn fwd = averaged_green_column(st, c.Y, c.k, c.rho, qx.k_last);
        const GreenColumn adj = transpose_green_column(st, c.X, c.l, c.sigma, qy.k_first);
        const double a = fwd.average(qx, c.l);
        const double b = adj.average(qy, c.k);
        double peak = 0.0;
        for (const auto& s : fwd.field.slices) peak = std::max(peak, s.cwiseAbs().maxCoeff());
        const double denom = std::max({std::abs(a), std::abs(b), 1e-12 * peak});
        const double residual = denom > 0.0 ? std::abs(a - b) / denom : 0.0;
        rows[i] = {static_cast<double>(i), double(c.Y.k), double(c.Y.cell), double(c.X.k),
                   double(c.X.cell), c.rho, c.sigma, double(c.k), double(c.l), a, b, residual};
    });
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.back());
    rec.rows = std::move(rows);
    rec.samples = cases.size();
    rec.fitted["max_residual"] = worst;
    rec.status = worst <= tolerance ? Status::pass : Status::fail;
    rec.message = "max relative residual " + fmt(worst) + " over " + std::to_string(cases.size()) + " cases";
    return rec;
}

CheckRecord check_normalization(const ThetaStepper& stepper, int k_s, int k_t, double tolerance) {
    CheckRecord rec = make_record("normalization", "normalization", tolerance);
    const Propagator P = propagator(stepper, k_s, k_t);
    const int N = stepper.N();
    const int cells = stepper.mesh().num_cells();
    double worst = 0.0, min_deficit = kInfinity;
    rec.columns = {"row", "i", "j", "row_sum"};
    for (int r = 0; r < cells * N; ++r) {
        const int i = r % N;
        for (int j = 0; j < N; ++j) {
            double sum = 0.0;
            for (int c = 0; c < cells; ++c) sum += P.matrix(r, static_cast<Eigen::Index>(c) * N + j);
            const double target = i == j ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(sum - target));
            if (i == j) min_deficit = std::min(min_deficit, target - sum);
            rec.rows.push_back({double(r), double(i), double(j), sum});
        }
    }
    rec.samples = static_cast<std::size_t>(cells * N * N);
    rec.fitted["max_deviation"] = worst;
    if (stepper.mesh().periodic()) {
        rec.status = worst <= tolerance ? Status::pass : Status::fail;
        rec.message = "max row-sum deviation " + fmt(worst);
    } else {
        rec.status = Status::informational;
        rec.fitted["min_mass_deficit"] = min_deficit;
        rec.message = "Dirichlet mode: boundary mass loss, max deviation " + fmt(worst);
    }
    return rec;
}

CheckRecord check_semigroup(const ThetaStepper& stepper, int k_s, int k_r, int k_t,
                            double tolerance) {
    if (!(k_s <= k_r && k_r <= k_t)) throw PreconditionError("check_semigroup: need s <= r <= t");
    CheckRecord rec = make_record("semigroup", "semigroup", tolerance);
    const Propagator pts = propagator(stepper, k_s, k_t);
    const Propagator ptr = propagator(stepper, k_r, k_t);
    const Propagator prs = propagator(stepper, k_s, k_r);
    const Eigen::MatrixXd composed = ptr.matrix * prs.matrix;
    const double scale = max_abs(pts.matrix);
    const double rel = max_abs(pts.matrix - composed) / scale;
    rec.samples = static_cast<std::size_t>(pts.matrix.size());
    rec.fitted["relative_error"] = rel;
    rec.status = rel <= tolerance ? Status::pass : Status::fail;
    rec.message = "max-norm relative defect " + fmt(rel);
    return rec;
}

CheckRecord check_oracle_equivalence(const ThetaStepper& stepper, const Slice& g, const Source& f,
                                     int k_start, int k_end, double tolerance) {
    CheckRecord rec = make_record("oracle_equivalence", "dense-oracle", tolerance);
    const Trajectory u = solve_forward(stepper, g, f, k_start, k_end);
    const Trajectory o = dense_spacetime_oracle(stepper, g, f, k_start, k_end);
    double diff = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < u.slices.size(); ++j) {
        diff = std::max(diff, (u.slices[j] - o.slices[j]).cwiseAbs().maxCoeff());
        scale = std::max(scale, o.slices[j].cwiseAbs().maxCoeff());
    }
    const double rel = scale > 0.0 ? diff / scale : diff;
    rec.samples = u.slices.size() * static_cast<std::size_t>(stepper.slice_size());
    rec.fitted["relative_error"] = rel;
    rec.status = rel <= tolerance ? Status::pass : Status::fail;
    rec.message = "max relative difference to the dense oracle " + fmt(rel);
    return rec;
}

CheckRecord check_adjointness(const ThetaStepper& stepper, const Slice& a, const Slice& b,
                              int k_start, int k_end, double tolerance) {
    CheckRecord rec = make_record("adjointness", "adjoint-consistency", tolerance);
    const Mesh& mesh = stepper.mesh();
    const Trajectory fwd = solve_forward(stepper, a, no_source(), k_start, k_end);
    const Trajectory bwd = solve_backward(stepper, b, no_source(), k_start, k_end);
    const double lhs = dot_weighted(mesh, fwd.at(k_end), b);
    const double rhs = dot_weighted(mesh, a, bwd.at(k_start));
    const double scale = mesh.cell_volume() * std::max(fwd.at(k_end).norm() * b.norm(),
                                                       a.norm() * bwd.at(k_start).norm());
    const double rel = scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0;
    rec.samples = 1;
    rec.fitted["lhs"] = lhs;
    rec.fitted["rhs"] = rhs;
    rec.fitted["relative_error"] = rel;
    rec.status = rel <= tolerance ? Status::pass : Status::fail;
    rec.message = "<Pa, b> - <a, P^T b> relative " + fmt(rel);
    return rec;
}

CheckRecord check_causality(const ThetaStepper& stepper, GridPoint pole, double rho, int k_T) {
    CheckRecord rec = make_record("causality", "zero-extension", 0.0);
    const Mesh& mesh = stepper.mesh();
    const Eigen::Index S = stepper.slice_size();
    const Cylinder q = backward_cylinder(mesh, pole, rho);
    if (q.k_first < 1) throw PreconditionError("check_causality: cylinder must start after the mesh origin");

    // Forward column solved from the mesh origin: nothing may appear before
    // the cylinder opens.
    Slice load = Slice::Zero(S);
    for (int c : q.cells) load[static_cast<Eigen::Index>(c) * stepper.N()] = 1.0 / q.measure;
    auto src = [&](int k) -> std::optional<Slice> {
        if (k < q.k_first || k > q.k_last) return std::nullopt;
        return load;
    };
    const Trajectory u = solve_forward(stepper, Slice::Zero(S), src, 0, k_T);
    double before = 0.0, after = 0.0;
    for (int k = 0; k <= k_T; ++k) {
        const double m = u.at(k).cwiseAbs().maxCoeff();
        (k <= q.k_first ? before : after) = std::max(k <= q.k_first ? before : after, m);
    }

    // Transpose column: nothing after the forward cylinder closes.
    const Cylinder qf = forward_cylinder(mesh, pole, rho);
    Slice wload = Slice::Zero(S);
    for (int c : qf.cells) wload[static_cast<Eigen::Index>(c) * stepper.N()] = 1.0 / qf.measure;
    auto wsrc = [&](int k) -> std::optional<Slice> {
        if (k < qf.k_first || k > qf.k_last) return std::nullopt;
        return wload;
    };
    const Trajectory r = solve_backward(stepper, Slice::Zero(S), wsrc, pole.k - 1, qf.k_last + 3);
    double beyond = 0.0;
    for (int k = qf.k_last; k <= qf.k_last + 3; ++k) beyond = std::max(beyond, r.at(k).cwiseAbs().maxCoeff());

    // Cell limit: extrapolation of columns that are all zero before s - rho^2.
    const double rho2 = std::max(min_resolvable_radius(mesh), rho / std::sqrt(2.0));
    std::vector<double> rhos{rho, rho2};
    double extrapolated = 0.0;
    if (rho2 < rho) {
        const GreenColumn c1 = averaged_green_column(stepper, pole, 0, rho, k_T);
        const GreenColumn c2 = averaged_green_column(stepper, pole, 0, rho2, k_T);
        for (int k = std::max(0, q.k_first - 3); k < q.k_first; ++k)
            for (int c = 0; c < mesh.num_cells(); ++c)
                extrapolated = std::max(extrapolated,
                                        std::abs(extrapolate_rho2(rhos, {c1.value(k, c, 0), c2.value(k, c, 0)})));
    }
    const GreenColumn cell = cell_green_column(stepper, pole, 0, pole.k + 1);
    for (int c = 0; c < mesh.num_cells(); ++c)
        extrapolated = std::max(extrapolated, std::abs(cell.value(pole.k - 1, c, 0)));

    rec.fitted["max_before_cylinder"] = before;
    rec.fitted["max_after_transpose_cylinder"] = beyond;
    rec.fitted["max_extrapolated_before_pole"] = extrapolated;
    rec.fitted["max_after"] = after;
    rec.samples = static_cast<std::size_t>(k_T + 1) * static_cast<std::size_t>(S);
    const bool ok = before == 0.0 && beyond == 0.0 && extrapolated == 0.0 && after > 0.0;
    rec.status = ok ? Status::pass : Status::fail;
    rec.message = ok ? "exact zeros outside the causal window" : "nonzero values outside the causal window";
    return rec;
}

// ---------------------------------------------------------------------------
// Quantitative bounds

CheckRecord check_kernel_oracle(const ThetaStepper& stepper, GridPoint pole,
                                const std::vector<double>& rho_list, int k_t, double tolerance) {
    CheckRecord rec = make_record("kernel_oracle", "heat-kernel", tolerance);
    const Mesh& mesh = stepper.mesh();
    const CoefficientField coeffs = stepper.spec().effective();
    if (coeffs.depends_on_x() || coeffs.depends_on_t())
        throw PreconditionError("check_kernel_oracle: needs constant coefficients");
    if (!mesh.periodic()) throw PreconditionError("check_kernel_oracle: needs periodic mode");
    if (rho_list.empty() || k_t <= pole.k) throw PreconditionError("check_kernel_oracle: bad inputs");
    const int n = mesh.dim();
    std::vector<double> diag(static_cast<std::size_t>(n)), period(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        diag[static_cast<std::size_t>(a)] = coeffs(mesh.time(pole.k), mesh.center(pole.cell), a, a, 0, 0);
        period[static_cast<std::size_t>(a)] = mesh.domain().length(a);
    }
    std::vector<GreenColumn> cols;
    for (double rho : rho_list) cols.push_back(averaged_green_column(stepper, pole, 0, rho, k_t));

    const double dt = mesh.time(k_t) - mesh.time(pole.k);
    const Point y = mesh.center(pole.cell);
    const double window = 3.0 * std::sqrt(dt);
    double err = 0.0, peak = 0.0;
    rec.columns = {"cell", "distance", "extrapolated", "kernel"};
    std::vector<double> values(rho_list.size());
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const Point d = mesh.displacement(c, y);
        const double dist = mesh.distance(c, y);
        if (dist > window) continue;
        for (std::size_t r = 0; r < cols.size(); ++r) values[r] = cols[r].value(k_t, c, 0);
        const double ext = extrapolate_rho2(rho_list, values);
        const double phi = wrapped_heat_kernel(dt, std::span<const double>(d.data(), static_cast<std::size_t>(n)),
                                               period, diag);
        err = std::max(err, std::abs(ext - phi));
        peak = std::max(peak, phi);
        rec.rows.push_back({double(c), dist, ext, phi});
        ++rec.samples;
    }
    const double rel = peak > 0.0 ? err / peak : kNaN;
    rec.fitted["sup_relative_error"] = rel;
    rec.fitted["t_minus_s"] = dt;
    rec.status = rel <= tolerance ? Status::pass : Status::fail;
    rec.message = "sup-relative error of extrapolated Gamma vs periodized kernel " + fmt(rel);
    return rec;
}

DecayFit fit_pointwise_decay(const GreenBlock& block, std::span<const double> radii, double margin) {
    if (block.columns.empty()) throw PreconditionError("fit_pointwise_decay: empty block");
    if (radii.size() < 2) throw PreconditionError("fit_pointwise_decay: need at least two radii");
    const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
    if (*hi < 10.0 * *lo * (1.0 - 1e-9)) throw PreconditionError("fit_pointwise_decay: radii must span a decade");
    const GreenColumn& col = block.front();
    if (*lo < 3.0 * col.rho) throw PreconditionError("fit_pointwise_decay: radii must be >= 3 rho");
    const Mesh& mesh = col.field.mesh;
    const int n = mesh.dim();
    std::vector<double> xs, ys;
    for (double r : radii) {
        const int k = col.pole.k + std::max(1, static_cast<int>(std::lround(r * r / mesh.tau())));
        Point x = col.pole_x;
        x[0] += r;
        if (!mesh.periodic() && x[0] >= mesh.domain().hi[0])
            throw PreconditionError("fit_pointwise_decay: ray leaves the domain");
        if (mesh.periodic()) x[0] = mesh.domain().lo[0] + std::fmod(x[0] - mesh.domain().lo[0], mesh.domain().length(0));
        const int cell = mesh.nearest_cell(x);
        const double dist = parabolic_distance(mesh.time(k), mesh.distance(cell, col.pole_x), col.pole_t);
        xs.push_back(dist);
        ys.push_back(op_norm(block.matrix(k, cell)));
    }
    DecayFit out;
    out.fit = fit_power_law(xs, ys);
    out.pass = std::isfinite(out.fit.exponent) && out.fit.exponent <= -n + margin;
    return out;
}

GaussianFit fit_gaussian(const GreenBlock& block, std::span<const int> sample_steps, double lambda,
                         double Lambda_bound, double c_max) {
    if (block.columns.empty() || sample_steps.empty())
        throw PreconditionError("fit_gaussian: need a block and sample steps");
    const GreenColumn& col = block.front();
    const Mesh& mesh = col.field.mesh;
    if (!mesh.periodic()) throw PreconditionError("fit_gaussian: needs periodic mode");
    const int n = mesh.dim();
    double L = kInfinity;
    for (int a = 0; a < n; ++a) L = std::min(L, mesh.domain().length(a));

    GaussianFit out;
    out.kappa_required = lambda / (8.0 * Lambda_bound * Lambda_bound);
    for (int step : sample_steps) {
        if (step < 1) throw PreconditionError("fit_gaussian: sample steps must be positive");
        const int k = col.pole.k + step;
        const double dt = mesh.time(k) - col.pole_t;
        // Periodic images stay below 1% of the main term inside this radius.
        const double wrap = 0.5 * L - 2.0 * Lambda_bound * dt * std::log(100.0) / L;
        std::vector<std::array<double, 3>> slice;
        double peak = 0.0;
        for (int c = 0; c < mesh.num_cells(); ++c) {
            const double d = mesh.distance(c, col.pole_x);
            const double v = op_norm(block.matrix(k, c));
            peak = std::max(peak, v);
            if (d <= wrap) slice.push_back({dt, d, v});
        }
        for (const auto& p : slice)
            if (p[2] > 1e-10 * peak) out.points.push_back(p);
    }
    out.samples = out.points.size();
    auto needed = [&](double kappa) {
        double c = 0.0;
        for (const auto& p : out.points)
            c = std::max(c, p[2] * std::pow(p[0], 0.5 * n) * std::exp(kappa * p[1] * p[1] / p[0]));
        return c;
    };
    out.constant_at_required = needed(out.kappa_required);
    if (needed(0.0) > c_max) {
        out.kappa_fit = 0.0;
    } else {
        double lo = 0.0, hi = 1.0;
        while (needed(hi) <= c_max && hi < 1e6) {
            lo = hi;
            hi *= 2.0;
        }
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            (needed(mid) <= c_max ? lo : hi) = mid;
        }
        out.kappa_fit = lo;
    }
    out.pass = out.kappa_fit >= out.kappa_required && out.constant_at_required <= c_max;
    return out;
}

GaffneySets gaffney_sets(const Mesh& mesh, const Point& center, double half_width, double d) {
    if (half_width < 0.0 || d < 0.0) throw PreconditionError("gaffney_sets: negative sizes");
    GaffneySets sets;
    for (int c = 0; c < mesh.num_cells(); ++c)
        if (mesh.distance(c, center) <= half_width) sets.F.push_back(c);
    if (sets.F.empty()) throw PreconditionError("gaffney_sets: F contains no cells");
    double dist = kInfinity;
    for (int c = 0; c < mesh.num_cells(); ++c) {
        double m = kInfinity;
        const Point x = mesh.center(c);
        for (int f : sets.F) m = std::min(m, mesh.distance(f, x));
        if (m >= d - 1e-12) {
            sets.E.push_back(c);
            dist = std::min(dist, m);
        }
    }
    if (sets.E.empty()) throw PreconditionError("gaffney_sets: E contains no cells");
    sets.distance = dist;
    return sets;
}

CheckRecord check_gaffney(const ThetaStepper& stepper, const GaffneySets& sets, const Slice& g,
                          int k_s, int k_t, double slack) {
    if (k_t <= k_s) throw PreconditionError("check_gaffney: need t > s");
    const Mesh& mesh = stepper.mesh();
    const int N = stepper.N();
    std::vector<char> in_f(static_cast<std::size_t>(mesh.num_cells()), 0), in_e = in_f;
    for (int c : sets.F) in_f[static_cast<std::size_t>(c)] = 1;
    for (int c : sets.E) in_e[static_cast<std::size_t>(c)] = 1;
    double mass_f = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const double v = vector_norm_at(g, c, N);
        if (!in_f[static_cast<std::size_t>(c)] && v != 0.0)
            throw PreconditionError("check_gaffney: g must be supported in F");
        mass_f += v * v;
    }
    if (!(mass_f > 0.0)) throw PreconditionError("check_gaffney: g vanishes");
    const Trajectory u = solve_forward(stepper, g, no_source(), k_s, k_t);
    double mass_e = 0.0;
    for (int c : sets.E) mass_e += std::pow(vector_norm_at(u.at(k_t), c, N), 2);
    const CoefficientField coeffs = stepper.spec().effective();
    const double cgaf = coeffs.lambda() / (2.0 * coeffs.Lambda_bound() * coeffs.Lambda_bound());
    const double dt = mesh.time(k_t) - mesh.time(k_s);
    const double bound = std::exp(-cgaf * sets.distance * sets.distance / dt);
    const double ratio = mass_e / mass_f;

    CheckRecord rec = make_record("gaffney", "gaffney-offdiagonal", slack);
    rec.samples = sets.E.size() + sets.F.size();
    rec.fitted["ratio"] = ratio;
    rec.fitted["bound"] = bound;
    rec.fitted["ratio_over_bound"] = ratio / bound;
    rec.fitted["distance"] = sets.distance;
    rec.fitted["t_minus_s"] = dt;
    rec.status = ratio <= slack * bound ? Status::pass : Status::fail;
    rec.message = "L2 ratio " + fmt(ratio) + " vs bound " + fmt(bound);
    return rec;
}

Eigen::VectorXd davies_weight(const Mesh& mesh, const Point& center, double gamma, double cap) {
    Eigen::VectorXd psi(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) psi[c] = gamma * std::min(mesh.distance(c, center), cap);
    return psi;
}

CheckRecord davies_growth(const ThetaStepper& stepper, const Eigen::VectorXd& psi, double gamma,
                          const Slice& f, int k_s, int k_t, double slack) {
    const Mesh& mesh = stepper.mesh();
    const int N = stepper.N();
    if (psi.size() != mesh.num_cells()) throw PreconditionError("davies_growth: psi size mismatch");
    if (k_t <= k_s) throw PreconditionError("davies_growth: need t > s");
    double lip = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c)
        for (int a = 0; a < mesh.dim(); ++a) {
            const int nb = mesh.neighbor(c, a, 1);
            if (nb >= 0) lip = std::max(lip, std::abs(psi[nb] - psi[c]) / mesh.h(a));
        }
    if (lip > gamma * (1.0 + 1e-12) + 1e-15)
        throw PreconditionError("davies_growth: psi is not gamma-Lipschitz on faces");

    Slice g(f.size()), w(f.size());
    for (int c = 0; c < mesh.num_cells(); ++c)
        for (int i = 0; i < N; ++i) {
            const Eigen::Index idx = static_cast<Eigen::Index>(c) * N + i;
            g[idx] = std::exp(-psi[c]) * f[idx];
            w[idx] = std::exp(psi[c]);
        }
    const Trajectory u = solve_forward(stepper, g, no_source(), k_s, k_t);
    const CoefficientField coeffs = stepper.spec().effective();
    const double nu = coeffs.Lambda_bound() * coeffs.Lambda_bound() / coeffs.lambda();
    auto weighted = [&](const Slice& v) { return mesh.cell_volume() * w.cwiseProduct(v).squaredNorm(); };

    CheckRecord rec = make_record("davies", "davies-growth", slack);
    rec.columns = {"t_minus_s", "I", "bound"};
    const double I0 = weighted(u.at(k_s));
    double worst = 0.0, prev = I0;
    int violations = 0;
    for (int k = k_s; k <= k_t; ++k) {
        const double I = weighted(u.at(k));
        const double dt = mesh.time(k) - mesh.time(k_s);
        const double bound = std::exp(2.0 * nu * gamma * gamma * dt) * I0;
        worst = std::max(worst, I / bound);
        if (k > k_s && I > prev * (1.0 + 1e-12)) ++violations;
        prev = I;
        rec.rows.push_back({dt, I, bound});
    }
    rec.samples = rec.rows.size();
    rec.fitted["max_ratio"] = worst;
    rec.fitted["monotonicity_violations"] = violations;
    rec.fitted["gamma"] = gamma;
    rec.fitted["nu"] = nu;
    // With gamma = 0 the estimate is plain L2 decay, so any growth is a failure.
    const bool ok = worst <= slack && (gamma != 0.0 || violations == 0);
    rec.status = ok ? Status::pass : Status::fail;
    rec.message = "max I(t) / (e^{2 nu gamma^2 (t-s)} I(s)) = " + fmt(worst) + ", " +
                  std::to_string(violations) + " monotonicity violations";
    return rec;
}

LevelFit weak_lp_levels(const GreenColumn& column, std::span<const double> levels,
                        bool use_gradient, double margin) {
    if (levels.size() < 2) throw PreconditionError("weak_lp_levels: need at least two levels");
    const auto [lo, hi] = std::minmax_element(levels.begin(), levels.end());
    if (!(*lo > 0.0) || *hi < 10.0 * *lo * (1.0 - 1e-9))
        throw PreconditionError("weak_lp_levels: levels must be positive and span a decade");
    const Trajectory& f = column.field;
    const Mesh& mesh = f.mesh;
    const int n = mesh.dim();
    std::vector<Eigen::VectorXd> mags;
    for (const auto& s : f.slices) {
        Eigen::VectorXd m(mesh.num_cells());
        if (use_gradient) {
            m = gradient_norm2(mesh, f.N, s).cwiseSqrt();
        } else {
            for (int c = 0; c < mesh.num_cells(); ++c) m[c] = vector_norm_at(s, c, f.N);
        }
        mags.push_back(std::move(m));
    }
    std::vector<double> xs(levels.begin(), levels.end()), ys;
    const double w = mesh.tau() * mesh.cell_volume();
    for (double lev : xs) {
        double measure = 0.0;
        for (const auto& m : mags) measure += w * static_cast<double>((m.array() > lev).count());
        ys.push_back(measure);
    }
    LevelFit out;
    out.fit = fit_power_law(xs, ys);
    out.threshold = use_gradient ? -double(n + 2) / (n + 1) + margin : -double(n + 2) / n + margin;
    out.pass = std::isfinite(out.fit.exponent) && out.fit.exponent <= out.threshold;
    return out;
}

Slice random_smooth_slice(const Mesh& mesh, int N, int modes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = mesh.dim();
    Slice out = Slice::Zero(static_cast<Eigen::Index>(mesh.num_cells()) * N);
    for (int i = 0; i < N; ++i) {
        out(Eigen::seqN(i, mesh.num_cells(), N)).setConstant(normal(rng));
        for (int m = 0; m < modes; ++m) {
            std::array<int, 2> kv{0, 0};
            for (int a = 0; a < n; ++a) kv[static_cast<std::size_t>(a)] = 1 + static_cast<int>(rng() % 3);
            const double amp = normal(rng), phase = 2.0 * std::numbers::pi * (normal(rng));
            for (int c = 0; c < mesh.num_cells(); ++c) {
                const Point x = mesh.center(c);
                double arg = phase;
                for (int a = 0; a < n; ++a)
                    arg += 2.0 * std::numbers::pi * kv[static_cast<std::size_t>(a)] *
                           (x[static_cast<std::size_t>(a)] - mesh.domain().lo[static_cast<std::size_t>(a)]) /
                           mesh.domain().length(a);
                out[static_cast<Eigen::Index>(c) * N + i] += amp * std::sin(arg);
            }
        }
    }
    if (!mesh.periodic()) {
        // Taper so the data is compatible with zero boundary values.
        for (int c = 0; c < mesh.num_cells(); ++c) {
            const Point x = mesh.center(c);
            double taper = 1.0;
            for (int a = 0; a < n; ++a)
                taper *= std::sin(std::numbers::pi * (x[static_cast<std::size_t>(a)] - mesh.domain().lo[static_cast<std::size_t>(a)]) /
                                  mesh.domain().length(a));
            out.segment(static_cast<Eigen::Index>(c) * N, N) *= taper;
        }
    }
    return out;
}

PhFit ph_decay_fit(const OperatorSpec& spec, std::span<const Trajectory> solutions, GridPoint X0,
                   std::span<const double> ladder, double min_mu0) {
    if (solutions.empty() || ladder.size() < 2) throw PreconditionError("ph_decay_fit: need solutions and a ladder");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (!(ladder[i] > ladder[i - 1])) throw PreconditionError("ph_decay_fit: ladder must increase");
    PhFit out;
    out.applicable = !spec.coeffs.depends_on_x();
    out.mu0 = kInfinity;
    out.exponent = kInfinity;
    for (const Trajectory& u : solutions) {
        const Mesh& mesh = u.mesh;
        const int n = mesh.dim();
        std::vector<double> energies;
        for (double r : ladder) {
            const Cylinder q = backward_cylinder(mesh, X0, r);
            if (q.k_first < u.k_begin || X0.k > u.k_end() + 1)
                throw PreconditionError("ph_decay_fit: cylinder leaves the solution window");
            if (!mesh.periodic() && mesh.domain().dist_to_boundary(mesh.center(X0.cell)) < r)
                throw PreconditionError("ph_decay_fit: cylinder leaves the domain");
            double e = 0.0;
            for (int k = q.k_first; k <= q.k_last; ++k) {
                const Eigen::VectorXd g2 = gradient_norm2(mesh, u.N, u.at(k));
                for (int c : q.cells) e += g2[c];
            }
            energies.push_back(e * mesh.tau() * mesh.cell_volume());
        }
        BoundFit fit = fit_power_law(ladder, energies);
        const double mu0 = 0.5 * (fit.exponent - n);
        const double R = ladder.back();
        const double C0 = fit.constant * std::pow(R, fit.exponent) / energies.back();
        out.mu0 = std::min(out.mu0, mu0);
        out.C0 = std::max(out.C0, C0);
        out.exponent = std::min(out.exponent, fit.exponent);
        out.min_r2 = std::min(out.min_r2, fit.r2);
        out.fits.push_back(std::move(fit));
    }
    out.pass = out.applicable && out.mu0 >= min_mu0;
    return out;
}

namespace {

double boundedness_ratio(const ThetaStepper& stepper,
                         const std::function<Eigen::VectorXd(const Point&)>& g, double s, double t0,
                         const Point& x0, double R) {
    const Mesh& mesh = stepper.mesh();
    const int N = stepper.N();
    const int k_s = mesh.time_index(s);
    const int k0 = mesh.time_index(t0);
    const GridPoint X0{k0, mesh.nearest_cell(x0)};
    const Cylinder big = backward_cylinder(mesh, X0, R);
    const Cylinder small = backward_cylinder(mesh, X0, 0.25 * R);
    if (big.k_first < k_s) throw PreconditionError("check_local_boundedness: Q_R reaches before s");
    Slice data(stepper.slice_size());
    for (int c = 0; c < mesh.num_cells(); ++c) data.segment(static_cast<Eigen::Index>(c) * N, N) = g(mesh.center(c));
    const Trajectory u = solve_forward(stepper, data, no_source(), k_s, k0);
    double sup = 0.0, sq = 0.0;
    for (int k = small.k_first; k <= small.k_last; ++k)
        for (int c : small.cells) sup = std::max(sup, vector_norm_at(u.at(k), c, N));
    for (int k = big.k_first; k <= big.k_last; ++k)
        for (int c : big.cells) sq += std::pow(vector_norm_at(u.at(k), c, N), 2);
    sq *= mesh.tau() * mesh.cell_volume() / big.measure;
    return sq > 0.0 ? sup / std::sqrt(sq) : kNaN;
}

} // namespace

CheckRecord check_local_boundedness(const ThetaStepper& coarse, const ThetaStepper& fine,
                                    const std::function<Eigen::VectorXd(const Point&)>& g,
                                    double s, double t0, const Point& x0, double R,
                                    double stability) {
    const CoefficientField coeffs = coarse.spec().effective();
    if (!(R < coeffs.R_c())) throw PreconditionError("check_local_boundedness: need R < R_c");
    if (!coarse.mesh().periodic() && coarse.mesh().domain().dist_to_boundary(x0) < R)
        throw PreconditionError("check_local_boundedness: Q_R must lie inside the domain");
    const double rc = boundedness_ratio(coarse, g, s, t0, x0, R);
    const double rf = boundedness_ratio(fine, g, s, t0, x0, R);
    CheckRecord rec = make_record("local_boundedness", "local-boundedness", stability);
    rec.samples = 2;
    rec.fitted["ratio_coarse"] = rc;
    rec.fitted["ratio_fine"] = rf;
    const double drift = std::abs(rc - rf) / rf;
    rec.fitted["relative_drift"] = drift;
    const bool ok = std::isfinite(rc) && std::isfinite(rf) && drift <= stability;
    rec.status = ok ? Status::pass : Status::fail;
    rec.message = "sup/mean-square ratio " + fmt(rc) + " (coarse), " + fmt(rf) + " (fine)";
    return rec;
}

CheckRecord initial_trace_test(const ThetaStepper& stepper, const Slice& g, int k_s, int x0_cell,
                               std::span<const int> t_steps, double tolerance) {
    if (t_steps.empty()) throw PreconditionError("initial_trace_test: need time offsets");
    for (std::size_t i = 0; i < t_steps.size(); ++i) {
        if (t_steps[i] < 1) throw PreconditionError("initial_trace_test: offsets must be >= 1 step");
        if (i > 0 && !(t_steps[i] < t_steps[i - 1]))
            throw PreconditionError("initial_trace_test: offsets must decrease toward s");
    }
    const int N = stepper.N();
    const Trajectory u = solve_forward(stepper, g, no_source(), k_s, k_s + t_steps.front());
    const Eigen::VectorXd g0 = g.segment(static_cast<Eigen::Index>(x0_cell) * N, N);
    CheckRecord rec = make_record("initial_trace", "initial-trace", tolerance);
    rec.columns = {"t_minus_s", "error"};
    std::vector<double> errors;
    for (int step : t_steps) {
        const Eigen::VectorXd v = u.at(k_s + step).segment(static_cast<Eigen::Index>(x0_cell) * N, N);
        errors.push_back((v - g0).norm());
        rec.rows.push_back({step * stepper.mesh().tau(), errors.back()});
    }
    bool monotone = true;
    for (std::size_t i = 1; i < errors.size(); ++i)
        if (errors[i] > errors[i - 1] * (1.0 + 1e-12) + 1e-15) monotone = false;
    const double limit = tolerance * (1.0 + g0.norm());
    rec.samples = errors.size();
    rec.fitted["final_error"] = errors.back();
    rec.fitted["final_t_minus_s"] = t_steps.back() * stepper.mesh().tau();
    rec.fitted["limit"] = limit;
    rec.fitted["monotone"] = monotone ? 1.0 : 0.0;
    const bool ok = monotone && errors.back() <= limit;
    rec.status = ok ? Status::pass : Status::fail;
    rec.message = std::string(monotone ? "monotone" : "non-monotone") + " approach, final error " +
                  fmt(errors.back()) + " vs " + fmt(limit);
    return rec;
}

CheckRecord check_bounded_initial(const ThetaStepper& stepper, const Slice& g, int k_s, int k_t,
                                  const Point& x) {
    const Mesh& mesh = stepper.mesh();
    if (k_t <= k_s) throw PreconditionError("check_bounded_initial: need t > s");
    const double dt = mesh.time(k_t) - mesh.time(k_s);
    if (!(std::sqrt(dt) < mesh.domain().dist_to_boundary(x)))
        throw PreconditionError("check_bounded_initial: need sqrt(t - s) < distance to the boundary");
    const double gmax = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    double umax = 0.0;
    if (gmax > 0.0) {
        const Trajectory u = solve_forward(stepper, g, no_source(), k_s, k_t);
        for (const auto& s : u.slices) umax = std::max(umax, s.cwiseAbs().maxCoeff());
    }
    const double ratio = gmax > 0.0 ? umax / gmax : 0.0;
    CheckRecord rec = make_record("bounded_initial", "bounded-initial-data", 1e-12);
    rec.samples = 1;
    rec.fitted["ratio"] = ratio;
    const bool scalar_implicit = stepper.N() == 1 && stepper.theta() == 1.0;
    if (scalar_implicit) {
        rec.status = ratio <= 1.0 + 1e-12 ? Status::pass : Status::fail;
    } else {
        rec.status = Status::informational;
    }
    rec.message = "sup|u| / ||g||_inf = " + fmt(ratio);
    return rec;
}

CheckRecord check_parabolicity(const CoefficientField& coeffs, const Domain& domain, double t0,
                               double t1, int sample_count) {
    const ParabolicityReport r = validate_parabolicity(coeffs, sample_count, domain, t0, t1);
    CheckRecord rec = make_record("parabolicity", "ellipticity-audit", coeffs.audit_tolerance());
    rec.samples = r.forms_evaluated;
    rec.fitted["lambda_est"] = r.lambda_est;
    rec.fitted["Lambda_est"] = r.Lambda_est;
    rec.fitted["lambda"] = coeffs.lambda();
    rec.fitted["Lambda_bound"] = coeffs.Lambda_bound();
    rec.status = r.ok ? Status::pass : Status::fail;
    rec.message = "sampled lambda " + fmt(r.lambda_est) + ", Lambda " + fmt(r.Lambda_est);
    return rec;
}

} // namespace glab
