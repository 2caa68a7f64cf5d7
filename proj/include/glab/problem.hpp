#pragma once

#include "glab/geometry.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace glab {

struct CoefficientTraits {
    std::string name = "custom";
    bool depends_on_t = true;
    bool depends_on_x = true;
    bool from_table = false;
};

/// The coefficient tensor A^{ab}_{ij}(t, x) of a divergence-form parabolic
/// system, together with its declared ellipticity constants.
///
/// Indices are zero based. The flat layout used by `evaluate` is
/// ((a * n + b) * N + i) * N + j.
class CoefficientField {
public:
    using Evaluator = std::function<void(double t, const Point& x, std::span<double> out)>;

    using Traits = CoefficientTraits;

    CoefficientField(int n, int N, Evaluator eval, double lambda, double Lambda_bound,
                     double R_c = kInfinity, Traits traits = {});

    int dim() const noexcept { return n_; }
    int system_size() const noexcept { return N_; }
    std::size_t tensor_size() const noexcept { return static_cast<std::size_t>(n_ * n_ * N_ * N_); }

    double lambda() const noexcept { return lambda_; }
    double Lambda_bound() const noexcept { return Lambda_; }
    double R_c() const noexcept { return R_c_; }
    const Traits& traits() const noexcept { return traits_; }
    const std::string& name() const noexcept { return traits_.name; }
    bool depends_on_t() const noexcept { return traits_.depends_on_t; }
    bool depends_on_x() const noexcept { return traits_.depends_on_x; }

    /// Audit tolerance: 1e-12 for closed forms, 1e-8 for interpolated tables.
    double audit_tolerance() const noexcept { return traits_.from_table ? 1e-8 : 1e-12; }

    std::size_t index(int a, int b, int i, int j) const noexcept {
        return static_cast<std::size_t>(((a * n_ + b) * N_ + i) * N_ + j);
    }

    void evaluate(double t, const Point& x, std::span<double> out) const;
    std::vector<double> evaluate(double t, const Point& x) const;
    double operator()(double t, const Point& x, int a, int b, int i, int j) const;

    /// Same tensor with different declared constants.
    CoefficientField with_constants(double lambda, double Lambda_bound, double R_c) const;
    /// Same tensor multiplied by a positive constant; constants scale with it.
    CoefficientField scaled(double factor) const;

    bool transposed() const noexcept { return transposed_; }

private:
    friend CoefficientField transpose_coefficients(const CoefficientField& coeffs);

    int n_;
    int N_;
    std::shared_ptr<const Evaluator> eval_;
    double lambda_;
    double Lambda_;
    double R_c_;
    Traits traits_;
    bool transposed_ = false;
};

/// Field evaluating to A^{ba}_{ji}; transposing twice restores the original.
CoefficientField transpose_coefficients(const CoefficientField& coeffs);

/// A system together with where it lives. `transposed` selects the
/// transpose coefficients.
struct OperatorSpec {
    CoefficientField coeffs;
    Domain domain;
    bool transposed = false;

    CoefficientField effective() const {
        return transposed ? transpose_coefficients(coeffs) : coeffs;
    }
};

struct SpaceTimePoint {
    double t = 0.0;
    Point x{0.0, 0.0};
};

struct ParabolicityReport {
    double lambda_est = 0.0;
    double Lambda_est = 0.0;
    bool ok = false;
    std::size_t forms_evaluated = 0;
};

/// Audits the declared (lambda, Lambda_bound) by sampling points and
/// directions. Points are drawn uniformly in `domain` x [t0, t1]; directions
/// are random unit tensors, coordinate tensors and rank-one products.
ParabolicityReport validate_parabolicity(const CoefficientField& coeffs, int sample_count,
                                         const Domain& domain, double t0 = 0.0,
                                         double t1 = 1.0, std::uint64_t seed = 0x5eed);

ParabolicityReport validate_parabolicity(const CoefficientField& coeffs,
                                         std::span<const SpaceTimePoint> points,
                                         std::uint64_t seed = 0x5eed);

/// Scalar coefficients a^{ab}(t, x) used as the diagonal reference.
struct ScalarCoefficient {
    int n = 1;
    std::function<double(double t, const Point& x, int a, int b)> eval;
};

/// sup over samples of (sum |A^{ab}_{ij} - a^{ab} delta_ij|^2)^{1/2}.
double diagonal_distance(const CoefficientField& coeffs, const ScalarCoefficient& scalar,
                         std::span<const SpaceTimePoint> samples);

/// Probe set for the VMO_x modulus: centers, candidate radii and the
/// midpoint-quadrature resolution per space axis and in time.
struct VmoProbe {
    std::vector<SpaceTimePoint> centers;
    std::vector<double> radii;
    int space_points = 32;
    int time_points = 8;
};

/// Discrete omega_delta: the largest mean oscillation (spatial mean removed
/// at each time) of any coefficient entry over probe cylinders with r <= delta.
double vmo_modulus(const CoefficientField& coeffs, double delta, const VmoProbe& probe);

} // namespace glab
