#include "glab/problem.hpp"
#include "glab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace glab {

CoefficientField::CoefficientField(int n, int N, Evaluator eval, double lambda,
                                   double Lambda_bound, double R_c, Traits traits)
    : n_(n),
      N_(N),
      eval_(std::make_shared<const Evaluator>(std::move(eval))),
      lambda_(lambda),
      Lambda_(Lambda_bound),
      R_c_(R_c),
      traits_(std::move(traits)) {
    if (n < 1 || n > kMaxDim) throw PreconditionError("coefficient dimension must be 1 or 2");
    if (N < 1) throw PreconditionError("system size must be >= 1");
    if (!(lambda > 0.0) || !(Lambda_bound > 0.0))
        throw PreconditionError("ellipticity constants must be positive");
    if (!(R_c > 0.0)) throw PreconditionError("R_c must be positive");
}

void CoefficientField::evaluate(double t, const Point& x, std::span<double> out) const {
    if (!transposed_) {
        (*eval_)(t, x, out);
        return;
    }
    std::vector<double> raw(tensor_size());
    (*eval_)(t, x, raw);
    for (int a = 0; a < n_; ++a)
        for (int b = 0; b < n_; ++b)
            for (int i = 0; i < N_; ++i)
                for (int j = 0; j < N_; ++j) out[index(a, b, i, j)] = raw[index(b, a, j, i)];
}

std::vector<double> CoefficientField::evaluate(double t, const Point& x) const {
    std::vector<double> out(tensor_size());
    evaluate(t, x, out);
    return out;
}

double CoefficientField::operator()(double t, const Point& x, int a, int b, int i, int j) const {
    return evaluate(t, x)[index(a, b, i, j)];
}

CoefficientField CoefficientField::with_constants(double lambda, double Lambda_bound,
                                                  double R_c) const {
    CoefficientField copy = *this;
    if (!(lambda > 0.0) || !(Lambda_bound > 0.0) || !(R_c > 0.0))
        throw PreconditionError("ellipticity constants must be positive");
    copy.lambda_ = lambda;
    copy.Lambda_ = Lambda_bound;
    copy.R_c_ = R_c;
    return copy;
}

CoefficientField CoefficientField::scaled(double factor) const {
    if (!(factor > 0.0)) throw PreconditionError("scale factor must be positive");
    auto inner = eval_;
    CoefficientField copy = *this;
    copy.eval_ = std::make_shared<const Evaluator>(
        [inner, factor](double t, const Point& x, std::span<double> out) {
            (*inner)(t, x, out);
            for (double& v : out) v *= factor;
        });
    copy.lambda_ *= factor;
    copy.Lambda_ *= factor;
    return copy;
}

CoefficientField transpose_coefficients(const CoefficientField& coeffs) {
    CoefficientField copy = coeffs;
    copy.transposed_ = !coeffs.transposed_;
    return copy;
}

namespace {

struct FormSampler {
    int n;
    int N;
    std::vector<std::vector<double>> directions;  // unit tensors xi[i * n + a]

    FormSampler(int n_, int N_, std::mt19937_64& rng, int random_count) : n(n_), N(N_) {
        const int m = n * N;
        auto push = [&](std::vector<double> xi) {
            double s = 0.0;
            for (double v : xi) s += v * v;
            if (s == 0.0) return;
            for (double& v : xi) v /= std::sqrt(s);
            directions.push_back(std::move(xi));
        };
        // coordinate tensors e_i (x) e_a
        for (int k = 0; k < m; ++k) {
            std::vector<double> xi(m, 0.0);
            xi[k] = 1.0;
            push(std::move(xi));
        }
        // rank-one products of axis and diagonal directions
        std::vector<std::vector<double>> etas;
        std::vector<std::vector<double>> zetas;
        auto build = [](int dim, std::vector<std::vector<double>>& out) {
            for (int p = 0; p < dim; ++p) {
                std::vector<double> v(dim, 0.0);
                v[p] = 1.0;
                out.push_back(v);
                for (int q = p + 1; q < dim; ++q) {
                    for (double sign : {1.0, -1.0}) {
                        std::vector<double> w(dim, 0.0);
                        w[p] = 1.0;
                        w[q] = sign;
                        out.push_back(w);
                    }
                }
            }
        };
        build(N, etas);
        build(n, zetas);
        for (const auto& eta : etas) {
            for (const auto& zeta : zetas) {
                std::vector<double> xi(m);
                for (int i = 0; i < N; ++i)
                    for (int a = 0; a < n; ++a) xi[i * n + a] = eta[i] * zeta[a];
                push(std::move(xi));
            }
        }
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int r = 0; r < random_count; ++r) {
            std::vector<double> xi(m);
            for (double& v : xi) v = normal(rng);
            push(std::move(xi));
        }
    }

    double form(const CoefficientField& c, std::span<const double> tensor,
                const std::vector<double>& xi) const {
        double q = 0.0;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < N; ++j)
                        q += tensor[c.index(a, b, i, j)] * xi[j * n + b] * xi[i * n + a];
        return q;
    }
};

} // namespace

ParabolicityReport validate_parabolicity(const CoefficientField& coeffs,
                                         std::span<const SpaceTimePoint> points,
                                         std::uint64_t seed) {
    if (points.empty()) throw PreconditionError("validate_parabolicity: sample_count must be >= 1");
    std::mt19937_64 rng(seed);
    const FormSampler sampler(coeffs.dim(), coeffs.system_size(), rng, 32);

    ParabolicityReport report;
    report.lambda_est = kInfinity;
    std::vector<double> tensor(coeffs.tensor_size());
    for (const auto& p : points) {
        coeffs.evaluate(p.t, p.x, tensor);
        double frob = 0.0;
        for (double v : tensor) {
            if (!std::isfinite(v))
                throw PreconditionError("validate_parabolicity: non-finite coefficient value");
            frob += v * v;
        }
        report.Lambda_est = std::max(report.Lambda_est, std::sqrt(frob));
        for (const auto& xi : sampler.directions) {
            report.lambda_est = std::min(report.lambda_est, sampler.form(coeffs, tensor, xi));
            ++report.forms_evaluated;
        }
    }
    const double tol = coeffs.audit_tolerance();
    report.ok = report.lambda_est >= coeffs.lambda() - tol &&
                report.Lambda_est <= coeffs.Lambda_bound() + tol;
    return report;
}

ParabolicityReport validate_parabolicity(const CoefficientField& coeffs, int sample_count,
                                         const Domain& domain, double t0, double t1,
                                         std::uint64_t seed) {
    if (sample_count < 1)
        throw PreconditionError("validate_parabolicity: sample_count must be >= 1");
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<SpaceTimePoint> points(static_cast<std::size_t>(sample_count));
    for (auto& p : points) {
        p.t = t0 + (t1 - t0) * unit(rng);
        for (int a = 0; a < domain.n; ++a)
            p.x[a] = domain.lo[a] + domain.length(a) * unit(rng);
    }
    return validate_parabolicity(coeffs, points, seed);
}

double diagonal_distance(const CoefficientField& coeffs, const ScalarCoefficient& scalar,
                         std::span<const SpaceTimePoint> samples) {
    if (scalar.n != coeffs.dim())
        throw PreconditionError("diagonal_distance: scalar field dimension does not match");
    const int n = coeffs.dim();
    const int N = coeffs.system_size();
    double worst = 0.0;
    std::vector<double> tensor(coeffs.tensor_size());
    for (const auto& p : samples) {
        coeffs.evaluate(p.t, p.x, tensor);
        double s = 0.0;
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                const double ref = scalar.eval(p.t, p.x, a, b);
                for (int i = 0; i < N; ++i) {
                    for (int j = 0; j < N; ++j) {
                        const double d = tensor[coeffs.index(a, b, i, j)] - (i == j ? ref : 0.0);
                        s += d * d;
                    }
                }
            }
        }
        worst = std::max(worst, std::sqrt(s));
    }
    return worst;
}

double vmo_modulus(const CoefficientField& coeffs, double delta, const VmoProbe& probe) {
    if (!(delta > 0.0)) throw PreconditionError("vmo_modulus: delta must be positive");
    if (probe.space_points < 1 || probe.time_points < 1)
        throw PreconditionError("vmo_modulus: quadrature resolution must be positive");
    const int n = coeffs.dim();
    const std::size_t entries = coeffs.tensor_size();
    const int q = probe.space_points;

    double omega = 0.0;
    std::vector<double> tensor(entries);
    std::vector<Point> nodes;
    std::vector<std::vector<double>> values;  // [node][entry]
    for (const auto& center : probe.centers) {
        for (double r : probe.radii) {
            if (!(r > 0.0) || r > delta) continue;
            // midpoint nodes of the ball
            nodes.clear();
            if (n == 1) {
                for (int p = 0; p < q; ++p)
                    nodes.push_back({center.x[0] - r + (p + 0.5) * 2.0 * r / q, 0.0});
            } else {
                for (int p = 0; p < q; ++p) {
                    for (int s = 0; s < q; ++s) {
                        const double dx = -r + (p + 0.5) * 2.0 * r / q;
                        const double dy = -r + (s + 0.5) * 2.0 * r / q;
                        if (dx * dx + dy * dy < r * r)
                            nodes.push_back({center.x[0] + dx, center.x[1] + dy});
                    }
                }
            }
            std::vector<double> deviation(entries, 0.0);
            values.assign(nodes.size(), std::vector<double>(entries));
            for (int m = 0; m < probe.time_points; ++m) {
                const double t = center.t - r * r + (m + 0.5) * 2.0 * r * r / probe.time_points;
                std::vector<double> mean(entries, 0.0);
                for (std::size_t p = 0; p < nodes.size(); ++p) {
                    coeffs.evaluate(t, nodes[p], values[p]);
                    for (std::size_t e = 0; e < entries; ++e) mean[e] += values[p][e];
                }
                for (double& v : mean) v /= static_cast<double>(nodes.size());
                for (std::size_t p = 0; p < nodes.size(); ++p)
                    for (std::size_t e = 0; e < entries; ++e)
                        deviation[e] += std::abs(values[p][e] - mean[e]);
            }
            const double norm = static_cast<double>(nodes.size()) * probe.time_points;
            for (double d : deviation) omega = std::max(omega, d / norm);
        }
    }
    return omega;
}

} // namespace glab
