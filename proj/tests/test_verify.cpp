#include "fixtures.hpp"

#include "glab/errors.hpp"
#include "glab/green.hpp"
#include "glab/kernel.hpp"
#include "glab/verify.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

using namespace glab;
using fixtures::mesh1;
using fixtures::mesh2;

TEST_SUITE("verify") {

TEST_CASE("power-law fit recovers exponent and constant") {
    std::vector<double> x{0.1, 0.2, 0.5, 1.0, 3.0}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -2.0));
    const auto fit = fit_power_law(x, y);
    CHECK(fit.exponent == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(fit.constant == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.x_min == 0.1);
    CHECK(fit.x_max == 3.0);
    std::vector<double> none{0.0, -1.0};
    CHECK(std::isnan(fit_power_law(none, none).exponent));
}

TEST_CASE("operator norm equals the largest singular value") {
    Eigen::MatrixXd one(1, 1);
    one << -2.5;
    CHECK(op_norm(one) == doctest::Approx(2.5));
    for (int n : {2, 3, 5}) {
        const Eigen::MatrixXd m = Eigen::MatrixXd::Random(n, n);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
        CHECK(op_norm(m) == doctest::Approx(svd.singularValues()[0]).epsilon(1e-9));
    }
}

TEST_CASE("heat kernel closed-form values") {
    const double zero[1] = {0.0}, one[1] = {1.0};
    CHECK(heat_kernel(1.0, zero) == doctest::Approx(1.0 / std::sqrt(4.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(heat_kernel(1.0, zero) == doctest::Approx(0.28209).epsilon(1e-5));
    CHECK(heat_kernel(0.25, one) == doctest::Approx(std::exp(-1.0) / std::sqrt(std::numbers::pi)).epsilon(1e-14));
    CHECK(heat_kernel(0.25, one) == doctest::Approx(0.20755).epsilon(1e-4));
    CHECK(heat_kernel(0.0, one) == 0.0);
    const double two[2] = {0.3, -0.2};
    CHECK(heat_kernel(0.1, two) ==
          doctest::Approx(std::exp(-0.13 / 0.4) / (0.4 * std::numbers::pi)).epsilon(1e-14));
    const double period[1] = {1.0};
    double images = 0.0;
    for (int m = -50; m <= 50; ++m) {
        const double x[1] = {0.3 + m};
        images += heat_kernel(0.2, x);
    }
    const double x[1] = {0.3};
    CHECK(wrapped_heat_kernel(0.2, x, period) == doctest::Approx(images).epsilon(1e-14));
}

TEST_CASE("Gaffney bound values") {
    const Mesh m = mesh1(64, 0.005, -4.0, 4.0);
    const ThetaStepper st(m, fixtures::spec(presets::heat(1), m));
    const auto F = gaffney_sets(m, {0.0, 0.0}, 0.5, 1.0);
    CHECK(F.distance == doctest::Approx(1.0).epsilon(1e-12));
    Slice g = Slice::Zero(64);
    for (int c : F.F) g[c] = 1.0;
    const auto rec = check_gaffney(st, F, g, 0, 100);
    CHECK(rec.fitted.at("bound") == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(rec.fitted.at("ratio") < rec.fitted.at("bound"));
    CHECK(rec.status == Status::pass);

    const auto touching = gaffney_sets(m, {0.0, 0.0}, 0.5, 0.0);
    CHECK(touching.distance == 0.0);
    const auto trivial = check_gaffney(st, touching, g, 0, 20);
    CHECK(trivial.fitted.at("bound") == 1.0);
    CHECK(trivial.status == Status::pass);

    Slice outside = g;
    outside[0] = 1.0;
    CHECK_THROWS_AS(check_gaffney(st, F, outside, 0, 20), PreconditionError);
}

TEST_CASE("Gaffney and Davies bounds depend only on the declared constants") {
    const Mesh m = mesh1(64, 0.005, -4.0, 4.0);
    const auto F = gaffney_sets(m, {0.0, 0.0}, 0.5, 1.0);
    Slice g = Slice::Zero(64);
    for (int c : F.F) g[c] = 1.0;
    const auto a = presets::heat(1).with_constants(0.8, 1.3, kInfinity);
    const auto b = presets::oscillatory(1, 1.05, 0.2, 1.0).with_constants(0.8, 1.3, kInfinity);
    const ThetaStepper sa(m, fixtures::spec(a, m)), sb(m, fixtures::spec(b, m));
    const auto ra = check_gaffney(sa, F, g, 0, 40), rb = check_gaffney(sb, F, g, 0, 40);
    CHECK(ra.fitted.at("bound") == rb.fitted.at("bound"));
    CHECK(ra.fitted.at("ratio") != rb.fitted.at("ratio"));
    const auto psi = davies_weight(m, {0.0, 0.0}, 1.0, 2.0);
    const auto da = davies_growth(sa, psi, 1.0, g, 0, 40), db = davies_growth(sb, psi, 1.0, g, 0, 40);
    CHECK(da.fitted.at("nu") == db.fitted.at("nu"));
    CHECK(da.fitted.at("nu") == doctest::Approx(1.3 * 1.3 / 0.8));
}

TEST_CASE("Davies growth with zero weight is plain L2 decay") {
    const Mesh m = mesh1(64, 0.005, -2.0, 2.0);
    const ThetaStepper st(m, fixtures::spec(presets::heat(1), m));
    const Slice f = fixtures::random_slice(64, 8);
    const auto flat = davies_weight(m, {0.0, 0.0}, 0.0, 1.0);
    CHECK(flat.cwiseAbs().maxCoeff() == 0.0);
    const auto rec = davies_growth(st, flat, 0.0, f, 0, 50);
    CHECK(rec.status == Status::pass);
    CHECK(rec.fitted.at("monotonicity_violations") == 0.0);
    CHECK(rec.fitted.at("max_ratio") <= 1.0 + 1e-12);

    const auto psi = davies_weight(m, {0.0, 0.0}, 1.0, 1.5);
    const auto heat = davies_growth(st, psi, 1.0, f, 0, 200);
    CHECK(heat.fitted.at("nu") == 1.0);
    CHECK(heat.status == Status::pass);
    // weights steeper than the declared gamma are rejected
    CHECK_THROWS_AS(davies_growth(st, psi, 0.5, f, 0, 10), PreconditionError);
}

TEST_CASE("Gaussian fit agrees with a brute-force kappa scan") {
    const Mesh m = mesh1(128, 1e-3, -2.0, 2.0);
    const ThetaStepper st(m, fixtures::spec(presets::heat(1), m));
    const auto block = green_block(st, {0, 64}, 0.0, 1000);
    const std::vector<int> steps{20, 50, 100, 200, 500, 1000};
    const auto fit = fit_gaussian(block, steps, 1.0, 1.0);
    CHECK(fit.kappa_required == doctest::Approx(0.125));
    CHECK(fit.pass);
    REQUIRE(!fit.points.empty());
    double brute = 0.0;
    for (int i = 0; i <= 10000; ++i) {
        const double kappa = i * 1e-4;
        double c = 0.0;
        for (const auto& p : fit.points)
            c = std::max(c, p[2] * std::sqrt(p[0]) * std::exp(kappa * p[1] * p[1] / p[0]));
        if (c <= 10.0) brute = kappa;
    }
    CHECK(std::abs(fit.kappa_fit - brute) <= 2e-4);
}

TEST_CASE("rescaling coefficients and time leaves the propagator invariant") {
    const Mesh m = mesh2(8, 4e-3);
    const Mesh half(m.domain(), {8, 8}, 2e-3);
    const auto c = presets::rotating(2, 1.0, 2.0, 0.5, 0.0);
    const ThetaStepper a(m, fixtures::spec(c, m));
    const ThetaStepper b(half, fixtures::spec(c.scaled(2.0), half));
    const auto pa = propagator(a, 0, 5), pb = propagator(b, 0, 5);
    CHECK((pa.matrix - pb.matrix).cwiseAbs().maxCoeff() <= 1e-14 * pa.matrix.cwiseAbs().maxCoeff());
}

TEST_CASE("checks are pure functions of their inputs") {
    const Mesh m = mesh1(32, 5e-4);
    const ThetaStepper st(m, fixtures::spec(presets::rotating(1, 1.0, 2.0, 0.5, 6.0), m));
    const std::vector<double> r{0.07, 0.09};
    const auto cases = make_duality_cases(m, 2, 6, r, r, 0, 60);
    const auto again = make_duality_cases(m, 2, 6, r, r, 0, 60);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        CHECK(cases[i].Y.cell == again[i].Y.cell);
        CHECK(cases[i].X.k == again[i].X.k);
    }
    const auto a = check_duality(st, cases, 1e-10, 1);
    const auto b = check_duality(st, cases, 1e-10, 3);
    CHECK(a.fitted == b.fitted);
    CHECK(a.rows == b.rows);
}

TEST_CASE("initial trace and bounded data on trivial inputs") {
    const Mesh m = mesh1(64, 1e-3);
    const ThetaStepper st(m, fixtures::spec(presets::checkerboard(1, 1.0, 4.0, 0.125), m));
    const std::vector<int> steps{32, 16, 8, 4};
    const auto flat = initial_trace_test(st, Slice::Constant(64, 2.0), 0, 20, steps);
    CHECK(flat.fitted.at("final_error") <= 1e-12);
    CHECK(flat.status == Status::pass);
    const std::vector<int> bad{4, 8};
    CHECK_THROWS_AS(initial_trace_test(st, Slice::Constant(64, 2.0), 0, 20, bad), PreconditionError);

    const auto zero = check_bounded_initial(st, Slice::Zero(64), 0, 10, {0.5, 0.0});
    CHECK(zero.fitted.at("ratio") == 0.0);
    Slice box = Slice::Zero(64);
    for (int c = 20; c < 30; ++c) box[c] = 1.0;
    const auto heat = check_bounded_initial(st, box, 0, 10, {0.5, 0.0});
    CHECK(heat.status == Status::pass);
    CHECK(heat.fitted.at("ratio") <= 1.0);
}

TEST_CASE("local boundedness of a constant solution is one") {
    const Mesh m = mesh1(64, 1e-4);
    const auto spec = fixtures::spec(presets::heat(1), m);
    const ThetaStepper coarse(m, spec), fine(m.refined(2, 4), spec);
    const auto g = [](const Point&) { return Eigen::VectorXd::Constant(1, 3.0); };
    const auto rec = check_local_boundedness(coarse, fine, g, 0.0, 0.05, {0.5, 0.0}, 0.1);
    CHECK(rec.fitted.at("ratio_coarse") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rec.fitted.at("ratio_fine") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rec.status == Status::pass);
}

TEST_CASE("fits reject inputs outside their preconditions") {
    const Mesh m = mesh1(128, 1e-4, -2.0, 2.0);
    const ThetaStepper st(m, fixtures::spec(presets::heat(1), m));
    const auto block = green_block(st, {200, 64}, 0.1, 400);
    const std::vector<double> narrow{0.3, 0.5, 0.9};
    CHECK_THROWS_AS(fit_pointwise_decay(block, narrow), PreconditionError);
    const std::vector<double> levels{1.0, 2.0};
    CHECK_THROWS_AS(weak_lp_levels(block.front(), levels, false), PreconditionError);
}

TEST_CASE("parabolicity audit record") {
    const auto rec = check_parabolicity(presets::rotating(1, 1.0, 2.0, 0.5, 6.0), fixtures::box(1, 0.0, 1.0), 0.0, 1.0, 50);
    CHECK(rec.status == Status::pass);
    CHECK(rec.anchor == "ellipticity-audit");
}

}
