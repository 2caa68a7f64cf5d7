#pragma once

#include "glab/discrete_operator.hpp"
#include "glab/mesh.hpp"
#include "glab/problem.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace glab {

/// A discrete solution over the time slices k_begin .. k_begin + size - 1.
struct Trajectory {
    Mesh mesh;
    int N = 1;
    int k_begin = 0;
    std::vector<Slice> slices;

    int k_end() const noexcept { return k_begin + static_cast<int>(slices.size()) - 1; }
    bool contains(int k) const noexcept { return k >= k_begin && k <= k_end(); }
    double time(int j) const noexcept { return mesh.time(k_begin + j); }
    /// Slice at absolute time index k.
    const Slice& at(int k) const;
    double value(int k, int cell, int component) const {
        return at(k)[static_cast<Eigen::Index>(cell) * N + component];
    }
};

/// Load f_k injected at slice k; a step from k to k+1 then propagates
/// u_k + tau f_k. Returning nullopt means f_k = 0.
using Source = std::function<std::optional<Slice>(int k)>;

/// Theta scheme for the forward problem,
///   (I + tau theta L(t_{k+1})) u_{k+1} = (I - tau (1 - theta) L(t_k)) u_k,
/// and its exact algebraic adjoint. Factorizations are cached, so a stepper
/// is not safe to share between threads; copies are cheap and independent.
class ThetaStepper {
public:
    ThetaStepper(Mesh mesh, OperatorSpec spec, double theta = 1.0);
    ~ThetaStepper();
    ThetaStepper(const ThetaStepper& other);
    ThetaStepper& operator=(const ThetaStepper& other);
    ThetaStepper(ThetaStepper&&) noexcept;
    ThetaStepper& operator=(ThetaStepper&&) noexcept;

    const Mesh& mesh() const noexcept { return mesh_; }
    const OperatorSpec& spec() const noexcept { return spec_; }
    double theta() const noexcept { return theta_; }
    int N() const noexcept { return spec_.coeffs.system_size(); }
    Eigen::Index slice_size() const noexcept {
        return static_cast<Eigen::Index>(mesh_.num_cells()) * N();
    }

    /// One-step map F_k: slice at t_k to slice at t_{k+1}.
    Slice step(const Slice& u, int k) const;
    /// F_k^T: slice at t_{k+1} to slice at t_k.
    Slice step_adjoint(const Slice& p, int k) const;

    /// Implicit and explicit matrices of step k as dense-assemblable sparse
    /// matrices (M_{k+1}, E_k).
    SparseMatrix implicit_matrix(int k) const;
    SparseMatrix explicit_matrix(int k) const;

private:
    struct Cache;
    Mesh mesh_;
    OperatorSpec spec_;
    double theta_;
    std::unique_ptr<Cache> cache_;
};

/// One step of the theta scheme starting at time t (must be a grid time).
Slice step_forward(const Slice& u, double t, const Mesh& mesh, const OperatorSpec& spec,
                   double theta);

Trajectory solve_forward(const ThetaStepper& stepper, const Slice& g, const Source& f,
                         int k_start, int k_end);
Trajectory solve_forward(const OperatorSpec& spec, const Mesh& mesh, const Slice& g,
                         const Source& f, double s, double T, double theta = 1.0);

/// Backward problem from final data g at k_end down to k_start:
///   r_k = F_k^T (r_{k+1} + tau f_{k+1}).
Trajectory solve_backward(const ThetaStepper& stepper, const Slice& g, const Source& f,
                          int k_start, int k_end);
Trajectory solve_backward(const OperatorSpec& spec, const Mesh& mesh, const Slice& g,
                          const Source& f, double b, double S, double theta = 1.0);

struct EnergyNorm {
    double triple = 0.0;
    double grad_l2 = 0.0;
    double sup_l2 = 0.0;
};

/// (||D u||^2_{L2} + max_t ||u(t)||^2_{L2})^{1/2} with trapezoid time
/// quadrature of the face-difference energy.
EnergyNorm energy_norm(const Trajectory& traj);

/// Cell-volume weighted L2 norm of one slice.
double l2_norm(const Mesh& mesh, const Slice& u);

inline constexpr Eigen::Index kDenseOracleCap = 20000;

/// Brute-force reference: the whole block-bidiagonal space-time system of
/// the theta scheme assembled as one matrix and solved by a single direct
/// factorization (no time marching). At most kDenseOracleCap unknowns.
Trajectory dense_spacetime_oracle(const ThetaStepper& stepper, const Slice& g, const Source& f,
                                  int k_start, int k_end);

/// Zero source.
inline Source no_source() {
    return [](int) -> std::optional<Slice> { return std::nullopt; };
}

/// Source given per slice (f[j] applies at slice k_first + j).
Source slice_source(std::vector<Slice> f, int k_first);

} // namespace glab
