#pragma once

#include "glab/green.hpp"
#include "glab/solver.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace glab {

enum class Status { pass, fail, informational };
std::string to_string(Status status);

/// One verification outcome. `anchor` names the identity or estimate the
/// check targets; pass/fail is decided only against `tolerance`.
struct CheckRecord {
    std::string name;
    std::string anchor;
    Status status = Status::informational;
    std::map<std::string, double> fitted;
    double tolerance = 0.0;
    std::size_t samples = 0;
    std::string message;
    /// Plot-ready rows, emitted as CSV by the CLI.
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    bool passed() const noexcept { return status != Status::fail; }
};

struct VerificationReport {
    std::string scenario;
    std::vector<CheckRecord> records;

    void add(CheckRecord record) { records.push_back(std::move(record)); }
    /// True iff no non-informational record failed.
    bool all_passed() const;
    std::size_t failures() const;
};

/// Least-squares fit of log y = log C + p log x.
struct BoundFit {
    double exponent = 0.0;
    double constant = 0.0;
    double r2 = 0.0;
    double x_min = 0.0;
    double x_max = 0.0;
    std::vector<std::pair<double, double>> samples;
};

BoundFit fit_power_law(std::span<const double> xs, std::span<const double> ys);

/// Spectral norm of a small dense matrix: closed form for N <= 2, power
/// iteration on M^T M (tol 1e-10) otherwise.
double op_norm(const Eigen::MatrixXd& m);

/// The N columns of a Green matrix sharing one pole.
struct GreenBlock {
    std::vector<GreenColumn> columns;

    int N() const noexcept { return static_cast<int>(columns.size()); }
    const GreenColumn& front() const { return columns.front(); }
    Eigen::MatrixXd matrix(int k, int cell) const;
};

/// All N columns at one pole; rho = 0 requests cell-limit columns.
GreenBlock green_block(const ThetaStepper& stepper, GridPoint pole, double rho, int k_T);

// ---------------------------------------------------------------------------
// Exact identities

struct DualityCase {
    GridPoint Y;   ///< pole of the forward column
    GridPoint X;   ///< pole of the transpose column
    double rho = 0.0;
    double sigma = 0.0;
    int k = 0;     ///< forward column index
    int l = 0;     ///< transpose column index
};

/// Deterministic spread of duality cases: poles on random grid points,
/// radii drawn from the given lists, all column pairs cycled.
std::vector<DualityCase> make_duality_cases(const Mesh& mesh, int N, int count,
                                            std::span<const double> rhos,
                                            std::span<const double> sigmas, int k_lo, int k_hi,
                                            std::uint64_t seed = 7);

/// Averaged duality: cylinder mean of the transpose column over Q^-_rho(Y)
/// against the cylinder mean of the forward column over Q^+_sigma(X).
/// Pass iff the largest relative residual is <= tolerance (default 1e-10).
CheckRecord check_duality(const ThetaStepper& stepper, std::span<const DualityCase> cases,
                          double tolerance = 1e-10, int jobs = 1);

/// Row sums of P(t, s) against the identity. Periodic: pass iff <= 1e-12.
/// Dirichlet: informational, reports the mass deficit.
CheckRecord check_normalization(const ThetaStepper& stepper, int k_s, int k_t,
                                double tolerance = 1e-12);

/// ||P(t,s) - P(t,r) P(r,s)||_max / ||P(t,s)||_max <= 1e-12.
CheckRecord check_semigroup(const ThetaStepper& stepper, int k_s, int k_r, int k_t,
                            double tolerance = 1e-12);

/// solve_forward against the dense space-time oracle (1e-9 relative).
CheckRecord check_oracle_equivalence(const ThetaStepper& stepper, const Slice& g,
                                     const Source& f, int k_start, int k_end,
                                     double tolerance = 1e-9);

/// <forward(a), b> against <a, backward(b)> (1e-12 relative).
CheckRecord check_adjointness(const ThetaStepper& stepper, const Slice& a, const Slice& b,
                              int k_start, int k_end, double tolerance = 1e-12);

/// Zero extension of forward/backward columns and of the cell limit before
/// the pole (exact zeros).
CheckRecord check_causality(const ThetaStepper& stepper, GridPoint pole, double rho, int k_T);

// ---------------------------------------------------------------------------
// Quantitative bounds

/// Extrapolated Gamma on the slice at k_t against the periodized heat kernel,
/// sup-relative over |x - y| <= 3 sqrt(t - s). Pass iff <= tolerance.
CheckRecord check_kernel_oracle(const ThetaStepper& stepper, GridPoint pole,
                                const std::vector<double>& rho_list, int k_t,
                                double tolerance = 0.02);

struct DecayFit {
    BoundFit fit;
    bool pass = false;
};

/// Fits log|Gamma(X,Y)|_op against log|X - Y|_p along the ray
/// |x - y| = sqrt(t - s). Pass iff exponent <= -n + margin.
DecayFit fit_pointwise_decay(const GreenBlock& block, std::span<const double> radii,
                             double margin = 0.15);

struct GaussianFit {
    double kappa_fit = 0.0;
    double kappa_required = 0.0;
    double constant_at_required = 0.0;
    std::size_t samples = 0;
    bool pass = false;
    std::vector<std::array<double, 3>> points;  ///< (t - s, |x - y|, |Gamma|_op)
};

/// Largest kappa with |Gamma|_op <= C (t-s)^{-n/2} exp(-kappa xi^2) for all
/// samples and C <= c_max; compared against lambda / (8 Lambda^2).
GaussianFit fit_gaussian(const GreenBlock& block, std::span<const int> sample_steps,
                         double lambda, double Lambda_bound, double c_max = 10.0);

/// F = nodes within `half_width` of `center`; E = nodes at distance >= d
/// from F. Returns (F, E, dist(E, F)).
struct GaffneySets {
    std::vector<int> F;
    std::vector<int> E;
    double distance = 0.0;
};
GaffneySets gaffney_sets(const Mesh& mesh, const Point& center, double half_width, double d);

/// Off-diagonal L2 decay: int_E |u(t)|^2 <= slack e^{-c d^2/(t-s)} int_F |g|^2
/// with c = lambda / (2 Lambda^2).
CheckRecord check_gaffney(const ThetaStepper& stepper, const GaffneySets& sets, const Slice& g,
                          int k_s, int k_t, double slack = 1.05);

/// Exponentially weighted growth I(t) = ||e^psi u(t)||^2 for the solution
/// with data e^{-psi} f, against slack e^{2 nu gamma^2 (t-s)} I(s),
/// nu = Lambda^2 / lambda. Also counts monotonicity violations of I; with
/// gamma = 0 any violation fails the check.
CheckRecord davies_growth(const ThetaStepper& stepper, const Eigen::VectorXd& psi, double gamma,
                          const Slice& f, int k_s, int k_t, double slack = 1.05);

/// gamma * min(dist(x, center), cap): bounded, Lipschitz with constant gamma.
Eigen::VectorXd davies_weight(const Mesh& mesh, const Point& center, double gamma, double cap);

struct LevelFit {
    BoundFit fit;
    double threshold = 0.0;
    bool pass = false;
};

/// Space-time measure of {|Gamma| > level} (or of the gradient) against the
/// level. Pass iff slope <= -(n+2)/n + margin (value) or -(n+2)/(n+1) +
/// margin (gradient).
LevelFit weak_lp_levels(const GreenColumn& column, std::span<const double> levels,
                        bool use_gradient, double margin = 0.2);

struct PhFit {
    double mu0 = 0.0;        ///< worst case over the solutions
    double C0 = 0.0;         ///< worst case over the solutions
    double exponent = 0.0;   ///< worst (smallest) fitted exponent n + 2 mu0
    double min_r2 = 1.0;
    std::vector<BoundFit> fits;
    bool applicable = false; ///< coefficients are x-independent
    bool pass = false;
};

/// Random smooth data: a few low Fourier modes with random amplitudes.
Slice random_smooth_slice(const Mesh& mesh, int N, int modes, std::uint64_t seed);

/// Interior energy decay int_{Q^-_rho(X0)} |D u|^2 over the ladder, fitted
/// as C rho^{n + 2 mu0}. Pass iff x-independent and mu0 >= min_mu0;
/// informational otherwise.
PhFit ph_decay_fit(const OperatorSpec& spec, std::span<const Trajectory> solutions, GridPoint X0,
                   std::span<const double> ladder, double min_mu0 = 0.9);

/// sup_{Q^-_{R/4}} |u| / (mean_{Q^-_R} |u|^2)^{1/2} on the mesh of
/// `coarse` and on `fine`; pass iff finite and within 20% of each other.
CheckRecord check_local_boundedness(const ThetaStepper& coarse, const ThetaStepper& fine,
                                    const std::function<Eigen::VectorXd(const Point&)>& g,
                                    double s, double t0, const Point& x0, double R,
                                    double stability = 0.2);

/// |u(t, x0) - g(x0)| along t_steps (decreasing offsets in steps from k_s);
/// pass iff nonincreasing as t decreases and <= 0.02 (1 + |g(x0)|) at 4 tau.
CheckRecord initial_trace_test(const ThetaStepper& stepper, const Slice& g, int k_s, int x0_cell,
                               std::span<const int> t_steps, double tolerance = 0.02);

/// sup |u(t)| / ||g||_inf. Scalar theta = 1: pass iff <= 1 + 1e-12;
/// systems: informational.
CheckRecord check_bounded_initial(const ThetaStepper& stepper, const Slice& g, int k_s, int k_t,
                                  const Point& x);

/// Sampling audit of the declared ellipticity constants.
CheckRecord check_parabolicity(const CoefficientField& coeffs, const Domain& domain, double t0,
                               double t1, int sample_count);

} // namespace glab
