#pragma once

#include "glab/mesh.hpp"
#include "glab/problem.hpp"

#include <Eigen/SparseCore>

namespace glab {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Flux-form discretization of -D_a(A^{ab}_{ij} D_b u^j) at one time.
struct DiscreteOperator {
    SparseMatrix matrix;
    double t = 0.0;
    int N = 1;
};

/// Assemble the face-flux operator.
///
/// The flux through the face between a cell and its +e_a neighbor uses the
/// coefficients evaluated at the face midpoint. Normal derivatives are the
/// two-point difference across the face; tangential derivatives (a != b)
/// average the centered differences of the two cells sharing the face.
/// Ghost values beyond a Dirichlet boundary are zero; periodic axes wrap.
DiscreteOperator assemble(const Mesh& mesh, const OperatorSpec& spec, double t);
DiscreteOperator assemble(const Mesh& mesh, const CoefficientField& coeffs, double t);

/// Cell-centered discrete gradient magnitude squared summed over components,
/// sum_a sum_i |(u_i(c + e_a) - u_i(c - e_a)) / 2h_a|^2, per cell.
Eigen::VectorXd gradient_norm2(const Mesh& mesh, int N, const Slice& u);

/// Face-difference Dirichlet energy sum_faces h^n |D_h u|^2 of one slice.
double dirichlet_energy(const Mesh& mesh, int N, const Slice& u);

} // namespace glab
