#pragma once

#include "glab/mesh.hpp"
#include "glab/presets.hpp"
#include "glab/solver.hpp"

#include <random>
#include <string>
#include <vector>

namespace fixtures {

inline glab::Domain box(int n, double lo, double hi,
                        glab::BoundaryMode mode = glab::BoundaryMode::periodic) {
    glab::Domain d;
    d.n = n;
    d.lo = {lo, n == 2 ? lo : 0.0};
    d.hi = {hi, n == 2 ? hi : 1.0};
    d.mode = mode;
    return d;
}

inline glab::Mesh mesh1(int cells, double tau, double lo = 0.0, double hi = 1.0,
                        glab::BoundaryMode mode = glab::BoundaryMode::periodic) {
    return glab::Mesh(box(1, lo, hi, mode), {cells, 1}, tau);
}

inline glab::Mesh mesh2(int cells, double tau, double lo = 0.0, double hi = 1.0,
                        glab::BoundaryMode mode = glab::BoundaryMode::periodic) {
    return glab::Mesh(box(2, lo, hi, mode), {cells, cells}, tau);
}

inline glab::OperatorSpec spec(const glab::CoefficientField& c, const glab::Mesh& m) {
    return glab::OperatorSpec{c, m.domain(), false};
}

/// Every bundled preset in a small-parameter form for dimension n.
struct NamedPreset {
    std::string name;
    glab::CoefficientField coeffs;
};

inline std::vector<NamedPreset> all_presets(int n) {
    namespace p = glab::presets;
    std::vector<NamedPreset> out;
    out.push_back({"heat", p::heat(n)});
    out.push_back({"constant", n == 1 ? p::constant_diagonal({2.0}) : p::constant_diagonal({2.0, 0.5})});
    out.push_back({"t-only", p::time_oscillating(n, 1, 1.5, 0.5, 0.1)});
    out.push_back({"oscillatory", p::oscillatory(n, 2.0, 1.0, 1.0)});
    out.push_back({"checkerboard", p::checkerboard(n, 1.0, 4.0, 0.125)});
    out.push_back({"almost-diagonal", p::almost_diagonal(n, 2, 0.3, true)});
    out.push_back({"rotating", p::rotating(n, 1.0, 2.0, 0.5, 6.0)});
    return out;
}

inline glab::Slice random_slice(Eigen::Index size, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    glab::Slice s(size);
    for (auto& v : s) v = normal(rng);
    return s;
}

} // namespace fixtures
