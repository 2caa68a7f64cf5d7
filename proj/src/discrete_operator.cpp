#include "glab/discrete_operator.hpp"
#include "glab/errors.hpp"

#include <cmath>
#include <vector>

namespace glab {

namespace {

struct Term {
    int cell;     // -1: ghost (zero)
    double weight;
};

} // namespace

DiscreteOperator assemble(const Mesh& mesh, const OperatorSpec& spec, double t) {
    return assemble(mesh, spec.effective(), t);
}

DiscreteOperator assemble(const Mesh& mesh, const CoefficientField& coeffs, double t) {
    const int n = mesh.dim();
    const int N = coeffs.system_size();
    if (coeffs.dim() != n) throw PreconditionError("assemble: coefficient and mesh dimensions differ");

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.num_cells()) * N * N * (n == 1 ? 3 : 9) * 2);
    std::vector<double> A(coeffs.tensor_size());
    std::vector<Term> terms;

    // Visit each face once, identified by its (left, right) cells along axis;
    // a ghost side is -1.
    auto visit_face = [&](int left, int right, int axis, const Point& face) {
        coeffs.evaluate(t, face, A);
        for (double v : A) {
            if (!std::isfinite(v)) throw SolverError("assemble: non-finite coefficient at a face");
        }
        const double h_a = mesh.h(axis);
        for (int b = 0; b < n; ++b) {
            terms.clear();
            if (b == axis) {
                terms.push_back({right, 1.0 / h_a});
                terms.push_back({left, -1.0 / h_a});
            } else {
                const double w = 1.0 / (4.0 * mesh.h(b));
                for (int side : {left, right}) {
                    if (side < 0) continue;
                    terms.push_back({mesh.neighbor(side, b, +1), w});
                    terms.push_back({mesh.neighbor(side, b, -1), -w});
                }
            }
            for (const Term& term : terms) {
                if (term.cell < 0) continue;
                for (int i = 0; i < N; ++i) {
                    for (int j = 0; j < N; ++j) {
                        const double a = A[coeffs.index(axis, b, i, j)];
                        if (a == 0.0) continue;
                        const double v = a * term.weight / h_a;
                        const int col = term.cell * N + j;
                        if (left >= 0) triplets.emplace_back(left * N + i, col, -v);
                        if (right >= 0) triplets.emplace_back(right * N + i, col, v);
                    }
                }
            }
        }
    };

    for (int c = 0; c < mesh.num_cells(); ++c) {
        const Point xc = mesh.center(c);
        for (int axis = 0; axis < n; ++axis) {
            Point face = xc;
            face[axis] += 0.5 * mesh.h(axis);
            visit_face(c, mesh.neighbor(c, axis, +1), axis, face);
            if (!mesh.periodic() && mesh.neighbor(c, axis, -1) < 0) {
                Point low = xc;
                low[axis] -= 0.5 * mesh.h(axis);
                visit_face(-1, c, axis, low);
            }
        }
    }

    DiscreteOperator op;
    op.t = t;
    op.N = N;
    const Eigen::Index size = static_cast<Eigen::Index>(mesh.num_cells()) * N;
    op.matrix.resize(size, size);
    op.matrix.setFromTriplets(triplets.begin(), triplets.end());
    op.matrix.makeCompressed();
    return op;
}

Eigen::VectorXd gradient_norm2(const Mesh& mesh, int N, const Slice& u) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) {
        for (int a = 0; a < mesh.dim(); ++a) {
            const int up = mesh.neighbor(c, a, +1);
            const int dn = mesh.neighbor(c, a, -1);
            for (int i = 0; i < N; ++i) {
                const double vu = up < 0 ? 0.0 : u[up * N + i];
                const double vd = dn < 0 ? 0.0 : u[dn * N + i];
                const double d = (vu - vd) / (2.0 * mesh.h(a));
                out[c] += d * d;
            }
        }
    }
    return out;
}

double dirichlet_energy(const Mesh& mesh, int N, const Slice& u) {
    double e = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
        for (int a = 0; a < mesh.dim(); ++a) {
            const int up = mesh.neighbor(c, a, +1);
            const bool low_ghost = !mesh.periodic() && mesh.neighbor(c, a, -1) < 0;
            for (int i = 0; i < N; ++i) {
                const double here = u[c * N + i];
                const double there = up < 0 ? 0.0 : u[up * N + i];
                double d = (there - here) / mesh.h(a);
                e += d * d;
                if (low_ghost) {
                    d = here / mesh.h(a);
                    e += d * d;
                }
            }
        }
    }
    return e * mesh.cell_volume();
}

} // namespace glab
