#include "fixtures.hpp"

#include "glab/discrete_operator.hpp"
#include "glab/errors.hpp"
#include "glab/solver.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

using namespace glab;
using fixtures::mesh1;
using fixtures::mesh2;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m); }

} // namespace

TEST_SUITE("mesh-solver") {

TEST_CASE("mesh node conventions") {
    const Mesh p = mesh1(8, 0.01);
    CHECK(p.h(0) == doctest::Approx(0.125));
    CHECK(p.center(0)[0] == doctest::Approx(0.0));
    CHECK(p.neighbor(0, 0, -1) == 7);
    const Mesh d = mesh1(7, 0.01, 0.0, 1.0, BoundaryMode::dirichlet);
    CHECK(d.h(0) == doctest::Approx(0.125));
    CHECK(d.center(0)[0] == doctest::Approx(0.125));
    CHECK(d.neighbor(0, 0, -1) == -1);
    CHECK(d.neighbor(6, 0, +1) == -1);
    CHECK(p.time_index(0.03) == 3);
    CHECK_THROWS_AS(p.time_index(0.0305), PreconditionError);
}

TEST_CASE("heat stencil is the second difference") {
    const Mesh m = mesh1(16, 0.01);
    const auto A = dense(assemble(m, fixtures::spec(presets::heat(1), m), 0.0).matrix);
    const double h2 = m.h(0) * m.h(0);
    for (int c = 0; c < 16; ++c) {
        CHECK(A(c, c) == doctest::Approx(2.0 / h2));
        CHECK(A(c, (c + 1) % 16) == doctest::Approx(-1.0 / h2));
        CHECK(A(c, (c + 15) % 16) == doctest::Approx(-1.0 / h2));
        CHECK(A.row(c).cwiseAbs().sum() == doctest::Approx(4.0 / h2));
    }
    const auto C = dense(assemble(m, fixtures::spec(presets::constant_diagonal({3.0}), m), 0.0).matrix);
    CHECK((C - 3.0 * A).cwiseAbs().maxCoeff() <= 1e-9 / h2);
}

TEST_CASE("checkerboard row follows face-midpoint evaluation") {
    const Mesh m = mesh1(16, 0.01);
    const auto coeffs = presets::checkerboard(1, 1.0, 4.0, 0.125);
    const auto A = dense(assemble(m, fixtures::spec(coeffs, m), 0.0).matrix);
    const double h = m.h(0);
    for (int c : {2, 3, 5}) {
        const double aL = coeffs(0.0, {(c - 0.5) * h, 0.0}, 0, 0, 0, 0);
        const double aR = coeffs(0.0, {(c + 0.5) * h, 0.0}, 0, 0, 0, 0);
        CHECK(A(c, c - 1) == doctest::Approx(-aL / (h * h)));
        CHECK(A(c, c + 1) == doctest::Approx(-aR / (h * h)));
        CHECK(A(c, c) == doctest::Approx((aL + aR) / (h * h)));
    }
    // row 2 straddles a jump: one face sees 4, the other 1
    CHECK(A(2, 1) == doctest::Approx(-4.0 / (h * h)));
    CHECK(A(2, 3) == doctest::Approx(-1.0 / (h * h)));
}

TEST_CASE("constants are fixed points of every preset on a torus") {
    for (int n : {1, 2}) {
        const Mesh m = n == 1 ? mesh1(16, 0.01) : mesh2(8, 0.01);
        for (const auto& p : fixtures::all_presets(n)) {
            const int N = p.coeffs.system_size();
            Slice u(m.num_cells() * N);
            for (Eigen::Index r = 0; r < u.size(); ++r) u[r] = r % N == 0 ? 1.7 : -0.4;
            const Slice v = step_forward(u, 0.02, m, fixtures::spec(p.coeffs, m), 1.0);
            CAPTURE(p.name);
            CHECK((v - u).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("Fourier mode decays by the stencil symbol") {
    const int cells = 32;
    const Mesh m = mesh1(cells, 1e-3);
    Slice u(cells);
    for (int c = 0; c < cells; ++c) u[c] = std::sin(2.0 * std::numbers::pi * m.center(c)[0]);
    const double h = m.h(0);
    const double mu = 4.0 * std::pow(std::sin(std::numbers::pi * h), 2) / (h * h);
    const Slice v = step_forward(u, 0.0, m, fixtures::spec(presets::heat(1), m), 1.0);
    CHECK((v - u / (1.0 + m.tau() * mu)).cwiseAbs().maxCoeff() <= 1e-13);
    // Crank-Nicolson symbol
    const Slice w = step_forward(u, 0.0, m, fixtures::spec(presets::heat(1), m), 0.5);
    const double g = (1.0 - 0.5 * m.tau() * mu) / (1.0 + 0.5 * m.tau() * mu);
    CHECK((w - g * u).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("Dirichlet stencil is local and drops the boundary ghosts") {
    const Mesh m = mesh1(9, 1e-3, 0.0, 1.0, BoundaryMode::dirichlet);
    const auto A = dense(assemble(m, fixtures::spec(presets::heat(1), m), 0.0).matrix);
    const double h2 = m.h(0) * m.h(0);
    for (int r = 0; r < 9; ++r)
        for (int c = 0; c < 9; ++c)
            if (std::abs(r - c) > 1) CHECK(A(r, c) == 0.0);
    CHECK(A(0, 0) == doctest::Approx(2.0 / h2));
    CHECK(A(8, 8) == doctest::Approx(2.0 / h2));

    // explicit half-step of Crank-Nicolson moves a delta only to its neighbours
    ThetaStepper cn(m, fixtures::spec(presets::heat(1), m), 0.5);
    const auto E = dense(cn.explicit_matrix(0));
    Slice delta = Slice::Zero(9);
    delta[0] = 1.0;
    const Slice spread = E * delta;
    CHECK(spread[0] != 0.0);
    CHECK(spread[1] != 0.0);
    for (int c = 2; c < 9; ++c) CHECK(spread[c] == 0.0);
}

TEST_CASE("theta below one half is rejected") {
    const Mesh m = mesh1(8, 0.01);
    CHECK_THROWS_AS(ThetaStepper(m, fixtures::spec(presets::heat(1), m), 0.25), PreconditionError);
    CHECK_THROWS_AS(step_forward(Slice::Zero(8), 0.0, m, fixtures::spec(presets::heat(1), m), 1.5),
                    PreconditionError);
}

TEST_CASE("zero data gives zero forward and backward") {
    const Mesh m = mesh1(16, 0.01);
    const auto s = fixtures::spec(presets::rotating(1, 1.0, 2.0, 0.5, 6.0), m);
    const auto fw = solve_forward(s, m, Slice::Zero(32), no_source(), 0.0, 0.1);
    for (const auto& sl : fw.slices) CHECK(sl.cwiseAbs().maxCoeff() == 0.0);
    const auto bw = solve_backward(s, m, Slice::Zero(32), no_source(), 0.1, 0.0);
    for (const auto& sl : bw.slices) CHECK(sl.cwiseAbs().maxCoeff() == 0.0);
    const auto en = energy_norm(fw);
    CHECK(en.triple == 0.0);
    CHECK(en.grad_l2 == 0.0);
    CHECK(en.sup_l2 == 0.0);
}

TEST_CASE("energy norm of constants and monotone L2 decay") {
    const Mesh m = mesh1(32, 0.01, 0.0, 2.0);
    const ThetaStepper st(m, fixtures::spec(presets::heat(1), m));
    const auto flat = solve_forward(st, Slice::Constant(32, -3.0), no_source(), 0, 5);
    const auto e = energy_norm(flat);
    CHECK(e.grad_l2 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(e.sup_l2 == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-12));

    Slice g = fixtures::random_slice(32, 3);
    g /= l2_norm(m, g);
    const auto tr = solve_forward(st, g, no_source(), 0, 20);
    double prev = 1.0 + 1e-15;
    for (const auto& sl : tr.slices) {
        const double norm = l2_norm(m, sl);
        CHECK(norm <= prev);
        prev = norm;
    }
    CHECK(energy_norm(tr).sup_l2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("solve_forward matches the dense space-time oracle on every preset") {
    for (int n : {1, 2}) {
        const Mesh m = n == 1 ? mesh1(24, 0.004) : mesh2(6, 0.004);
        for (const auto& p : fixtures::all_presets(n)) {
            const ThetaStepper st(m, fixtures::spec(p.coeffs, m), 0.75);
            const Eigen::Index S = st.slice_size();
            const Slice g = fixtures::random_slice(S, 11);
            std::vector<Slice> f;
            for (int k = 0; k < 6; ++k) f.push_back(fixtures::random_slice(S, 20 + k));
            const Source src = slice_source(f, 2);
            const auto a = solve_forward(st, g, src, 1, 9);
            const auto b = dense_spacetime_oracle(st, g, src, 1, 9);
            double worst = 0.0, peak = 0.0;
            for (int k = 1; k <= 9; ++k) {
                worst = std::max(worst, (a.at(k) - b.at(k)).cwiseAbs().maxCoeff());
                peak = std::max(peak, b.at(k).cwiseAbs().maxCoeff());
            }
            CAPTURE(p.name);
            CHECK(worst <= 1e-9 * peak);
        }
    }
}

TEST_CASE("one-step oracle window is the single step") {
    const Mesh m = mesh1(20, 0.01);
    const ThetaStepper st(m, fixtures::spec(presets::oscillatory(1, 2.0, 1.0, 1.0), m));
    const Slice g = fixtures::random_slice(20, 5);
    const auto o = dense_spacetime_oracle(st, g, no_source(), 3, 4);
    CHECK((o.at(4) - st.step(g, 3)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("forward and backward steppers are exact adjoints") {
    const Mesh m = mesh2(8, 0.005);
    for (const auto& p : fixtures::all_presets(2)) {
        const ThetaStepper st(m, fixtures::spec(p.coeffs, m), 0.6);
        const Eigen::Index S = st.slice_size();
        const Slice a = fixtures::random_slice(S, 1), b = fixtures::random_slice(S, 2);
        const Slice Fa = solve_forward(st, a, no_source(), 2, 12).at(12);
        const Slice Ftb = solve_backward(st, b, no_source(), 2, 12).at(2);
        const double lhs = Fa.dot(b), rhs = a.dot(Ftb);
        CAPTURE(p.name);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * Fa.norm() * b.norm() * 10.0);
    }
}

TEST_CASE("self-adjoint time-independent coefficients reflect in time") {
    const Mesh m = mesh1(32, 0.002);
    const ThetaStepper st(m, fixtures::spec(presets::oscillatory(1, 2.0, 1.0, 1.0), m));
    const Slice g = fixtures::random_slice(32, 9);
    const auto fw = solve_forward(st, g, no_source(), 0, 15);
    const auto bw = solve_backward(st, g, no_source(), 0, 15);
    for (int j = 0; j <= 15; ++j)
        CHECK((fw.at(j) - bw.at(15 - j)).cwiseAbs().maxCoeff() <= 1e-12 * g.cwiseAbs().maxCoeff());
}

TEST_CASE("solves are deterministic") {
    const Mesh m = mesh2(8, 0.005);
    const auto s = fixtures::spec(presets::rotating(2, 1.0, 2.0, 0.5, 6.0), m);
    const Slice g = fixtures::random_slice(128, 4);
    const auto a = solve_forward(s, m, g, no_source(), 0.0, 0.05, 0.5);
    const auto b = solve_forward(s, m, g, no_source(), 0.0, 0.05, 0.5);
    for (std::size_t j = 0; j < a.slices.size(); ++j) CHECK(a.slices[j] == b.slices[j]);
}

TEST_CASE("spatial refinement converges at second order for a Fourier mode") {
    // exact heat solution sin(2 pi x) e^{-4 pi^2 t}, Crank-Nicolson with tau ~ h
    std::vector<double> errors;
    for (int cells : {16, 32, 64}) {
        const Mesh m = mesh1(cells, 0.08 / cells);
        Slice g(cells);
        for (int c = 0; c < cells; ++c) g[c] = std::sin(2.0 * std::numbers::pi * m.center(c)[0]);
        const ThetaStepper st(m, fixtures::spec(presets::heat(1), m), 0.5);
        const int K = cells;
        const Slice u = solve_forward(st, g, no_source(), 0, K).at(K);
        const double decay = std::exp(-4.0 * std::numbers::pi * std::numbers::pi * m.time(K));
        errors.push_back((u - decay * g).cwiseAbs().maxCoeff());
    }
    const double order = std::log2(errors[1] / errors[2]);
    CHECK(order >= 1.8);
}

}
