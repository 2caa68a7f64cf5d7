#include "glab/solver.hpp"
#include "glab/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <map>
#include <sstream>

namespace glab {

namespace {

constexpr double kResidualContract = 1e-11;

SparseMatrix identity(Eigen::Index size) {
    SparseMatrix I(size, size);
    I.setIdentity();
    return I;
}

bool exactly_symmetric(const SparseMatrix& m) {
    const SparseMatrix t = m.transpose();
    if (t.nonZeros() != m.nonZeros()) return false;
    return (m - t).norm() == 0.0;
}

/// Factorization of one implicit matrix with the residual contract enforced.
class Factor {
public:
    explicit Factor(SparseMatrix m) : matrix_(std::move(m)), symmetric_(exactly_symmetric(matrix_)) {
        if (symmetric_) {
            ldlt_.compute(matrix_);
            if (ldlt_.info() != Eigen::Success) symmetric_ = false;
        }
        if (!symmetric_) {
            lu_.analyzePattern(matrix_);
            lu_.factorize(matrix_);
            if (lu_.info() != Eigen::Success)
                throw SolverError("sparse LU factorization failed: " + lu_.lastErrorMessage());
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        return refine(matrix_, b, [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
            if (symmetric_) return ldlt_.solve(r);
            return lu_.solve(r);
        });
    }

    Eigen::VectorXd solve_transposed(const Eigen::VectorXd& b) const {
        if (symmetric_) return solve(b);
        if (!transposed_) transposed_ = std::make_unique<Factor>(SparseMatrix(matrix_.transpose()));
        return transposed_->solve(b);
    }

private:
    template <typename Solve>
    static Eigen::VectorXd refine(const SparseMatrix& m, const Eigen::VectorXd& b, Solve&& solve) {
        const double bnorm = b.norm();
        if (bnorm == 0.0) return Eigen::VectorXd::Zero(b.size());
        Eigen::VectorXd x = solve(b);
        double rel = 0.0;
        for (int pass = 0; pass < 3; ++pass) {
            const Eigen::VectorXd r = b - m * x;
            rel = r.norm() / bnorm;
            if (!std::isfinite(rel)) break;
            if (rel <= kResidualContract) return x;
            x += solve(r);
        }
        std::ostringstream msg;
        msg << "linear solve missed the residual contract: relative residual " << rel;
        throw SolverError(msg.str(), rel);
    }

    SparseMatrix matrix_;
    bool symmetric_;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
    mutable std::unique_ptr<Factor> transposed_;
};

} // namespace

struct ThetaStepper::Cache {
    // keyed by time index; time-independent coefficients use key 0 only
    std::map<int, SparseMatrix> operators;
    std::map<int, std::unique_ptr<Factor>> factors;
};

ThetaStepper::ThetaStepper(Mesh mesh, OperatorSpec spec, double theta)
    : mesh_(std::move(mesh)), spec_(std::move(spec)), theta_(theta), cache_(std::make_unique<Cache>()) {
    if (!(theta >= 0.5 && theta <= 1.0))
        throw PreconditionError("theta must lie in [1/2, 1] (unconditional stability)");
    if (spec_.coeffs.dim() != mesh_.dim())
        throw PreconditionError("coefficient dimension does not match the mesh");
}

ThetaStepper::~ThetaStepper() = default;
ThetaStepper::ThetaStepper(ThetaStepper&&) noexcept = default;
ThetaStepper& ThetaStepper::operator=(ThetaStepper&&) noexcept = default;

ThetaStepper::ThetaStepper(const ThetaStepper& other)
    : mesh_(other.mesh_), spec_(other.spec_), theta_(other.theta_), cache_(std::make_unique<Cache>()) {}

ThetaStepper& ThetaStepper::operator=(const ThetaStepper& other) {
    if (this != &other) {
        mesh_ = other.mesh_;
        spec_ = other.spec_;
        theta_ = other.theta_;
        cache_ = std::make_unique<Cache>();
    }
    return *this;
}

namespace {

int cache_key(const OperatorSpec& spec, int k) { return spec.coeffs.depends_on_t() ? k : 0; }

template <typename Map>
void trim(Map& map, std::size_t keep) {
    while (map.size() > keep) map.erase(map.begin());
}

const SparseMatrix& operator_at(const Mesh& mesh, const OperatorSpec& spec,
                                std::map<int, SparseMatrix>& cache, int k) {
    const int key = cache_key(spec, k);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    // Forward sweeps move up and backward sweeps move down; keep a window.
    if (cache.size() >= 4) {
        if (key > cache.rbegin()->first) cache.erase(cache.begin());
        else cache.erase(std::prev(cache.end()));
    }
    return cache.emplace(key, assemble(mesh, spec, mesh.time(k)).matrix).first->second;
}

} // namespace

SparseMatrix ThetaStepper::implicit_matrix(int k) const {
    const SparseMatrix& L = operator_at(mesh_, spec_, cache_->operators, k + 1);
    return identity(slice_size()) + (mesh_.tau() * theta_) * L;
}

SparseMatrix ThetaStepper::explicit_matrix(int k) const {
    if (theta_ == 1.0) return identity(slice_size());
    const SparseMatrix& L = operator_at(mesh_, spec_, cache_->operators, k);
    return identity(slice_size()) - (mesh_.tau() * (1.0 - theta_)) * L;
}

namespace {

const Factor& factor_at(const ThetaStepper& stepper, std::map<int, std::unique_ptr<Factor>>& cache,
                        int k) {
    const int key = cache_key(stepper.spec(), k + 1);
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;
    if (cache.size() >= 2) {
        if (key > cache.rbegin()->first) cache.erase(cache.begin());
        else cache.erase(std::prev(cache.end()));
    }
    return *cache.emplace(key, std::make_unique<Factor>(stepper.implicit_matrix(k))).first->second;
}

void check_slice(const Slice& u, Eigen::Index size, const char* what) {
    if (u.size() != size) throw PreconditionError(std::string(what) + ": slice has the wrong size");
    if (!u.allFinite()) throw PreconditionError(std::string(what) + ": slice is not finite");
}

} // namespace

Slice ThetaStepper::step(const Slice& u, int k) const {
    check_slice(u, slice_size(), "step");
    const Factor& f = factor_at(*this, cache_->factors, k);
    if (theta_ == 1.0) return f.solve(u);
    return f.solve(explicit_matrix(k) * u);
}

Slice ThetaStepper::step_adjoint(const Slice& p, int k) const {
    check_slice(p, slice_size(), "step_adjoint");
    const Factor& f = factor_at(*this, cache_->factors, k);
    Slice z = f.solve_transposed(p);
    if (theta_ == 1.0) return z;
    return explicit_matrix(k).transpose() * z;
}

Slice step_forward(const Slice& u, double t, const Mesh& mesh, const OperatorSpec& spec,
                   double theta) {
    const ThetaStepper stepper(mesh, spec, theta);
    return stepper.step(u, mesh.time_index(t));
}

Trajectory solve_forward(const ThetaStepper& stepper, const Slice& g, const Source& f, int k_start,
                         int k_end) {
    if (k_end <= k_start) throw PreconditionError("solve_forward: need T > s");
    check_slice(g, stepper.slice_size(), "solve_forward");
    Trajectory traj{stepper.mesh(), stepper.N(), k_start, {}};
    traj.slices.reserve(static_cast<std::size_t>(k_end - k_start + 1));
    traj.slices.push_back(g);
    const double tau = stepper.mesh().tau();
    for (int k = k_start; k < k_end; ++k) {
        Slice v = traj.slices.back();
        if (auto load = f(k)) v += tau * *load;
        traj.slices.push_back(stepper.step(v, k));
    }
    return traj;
}

Trajectory solve_forward(const OperatorSpec& spec, const Mesh& mesh, const Slice& g,
                         const Source& f, double s, double T, double theta) {
    const ThetaStepper stepper(mesh, spec, theta);
    return solve_forward(stepper, g, f, mesh.time_index(s), mesh.time_index(T));
}

Trajectory solve_backward(const ThetaStepper& stepper, const Slice& g, const Source& f,
                          int k_start, int k_end) {
    if (k_end <= k_start) throw PreconditionError("solve_backward: need b > S");
    check_slice(g, stepper.slice_size(), "solve_backward");
    const int count = k_end - k_start + 1;
    Trajectory traj{stepper.mesh(), stepper.N(), k_start,
                    std::vector<Slice>(static_cast<std::size_t>(count))};
    traj.slices.back() = g;
    const double tau = stepper.mesh().tau();
    for (int k = k_end - 1; k >= k_start; --k) {
        Slice v = traj.slices[static_cast<std::size_t>(k + 1 - k_start)];
        if (auto load = f(k + 1)) v += tau * *load;
        traj.slices[static_cast<std::size_t>(k - k_start)] = stepper.step_adjoint(v, k);
    }
    return traj;
}

Trajectory solve_backward(const OperatorSpec& spec, const Mesh& mesh, const Slice& g,
                          const Source& f, double b, double S, double theta) {
    const ThetaStepper stepper(mesh, spec, theta);
    return solve_backward(stepper, g, f, mesh.time_index(S), mesh.time_index(b));
}

const Slice& Trajectory::at(int k) const {
    if (!contains(k)) throw PreconditionError("trajectory has no slice at the requested time");
    return slices[static_cast<std::size_t>(k - k_begin)];
}

double l2_norm(const Mesh& mesh, const Slice& u) {
    return std::sqrt(mesh.cell_volume()) * u.norm();
}

EnergyNorm energy_norm(const Trajectory& traj) {
    EnergyNorm out;
    if (traj.slices.empty()) return out;
    const double tau = traj.mesh.tau();
    double grad2 = 0.0;
    const std::size_t last = traj.slices.size() - 1;
    for (std::size_t j = 0; j < traj.slices.size(); ++j) {
        const Slice& u = traj.slices[j];
        out.sup_l2 = std::max(out.sup_l2, l2_norm(traj.mesh, u));
        if (last == 0) continue;
        const double w = (j == 0 || j == last) ? 0.5 * tau : tau;
        grad2 += w * dirichlet_energy(traj.mesh, traj.N, u);
    }
    out.grad_l2 = std::sqrt(grad2);
    out.triple = std::sqrt(grad2 + out.sup_l2 * out.sup_l2);
    return out;
}

Trajectory dense_spacetime_oracle(const ThetaStepper& stepper, const Slice& g, const Source& f,
                                  int k_start, int k_end) {
    if (k_end <= k_start) throw PreconditionError("dense oracle: need a nonempty window");
    check_slice(g, stepper.slice_size(), "dense oracle");
    const Eigen::Index S = stepper.slice_size();
    const Eigen::Index K = k_end - k_start;
    if (S * K > kDenseOracleCap)
        throw PreconditionError("dense oracle: space-time unknowns exceed the cap of 20000");
    const double tau = stepper.mesh().tau();

    std::vector<Eigen::Triplet<double>> entries;
    auto place = [&entries](const SparseMatrix& block, Eigen::Index row, Eigen::Index col,
                            double sign) {
        for (int outer = 0; outer < block.outerSize(); ++outer)
            for (SparseMatrix::InnerIterator it(block, outer); it; ++it)
                entries.emplace_back(row + it.row(), col + it.col(), sign * it.value());
    };
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S * K);
    for (Eigen::Index j = 0; j < K; ++j) {
        const int k = k_start + static_cast<int>(j);
        const SparseMatrix E = stepper.explicit_matrix(k);
        place(stepper.implicit_matrix(k), j * S, j * S, 1.0);
        Eigen::VectorXd load = Eigen::VectorXd::Zero(S);
        if (auto fk = f(k)) load = tau * *fk;
        if (j == 0) load += g;
        else place(E, j * S, (j - 1) * S, -1.0);
        rhs.segment(j * S, S) = E * load;
    }
    SparseMatrix system(S * K, S * K);
    system.setFromTriplets(entries.begin(), entries.end());
    // one global factorization of the whole window, no time marching
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(system);
    if (lu.info() != Eigen::Success) throw SolverError("space-time oracle: factorization failed");
    const Eigen::VectorXd x = lu.solve(rhs);

    Trajectory traj{stepper.mesh(), stepper.N(), k_start, {}};
    traj.slices.push_back(g);
    for (Eigen::Index j = 0; j < K; ++j) traj.slices.push_back(x.segment(j * S, S));
    return traj;
}

Source slice_source(std::vector<Slice> f, int k_first) {
    auto data = std::make_shared<std::vector<Slice>>(std::move(f));
    return [data, k_first](int k) -> std::optional<Slice> {
        const int j = k - k_first;
        if (j < 0 || j >= static_cast<int>(data->size())) return std::nullopt;
        return (*data)[static_cast<std::size_t>(j)];
    };
}

} // namespace glab
