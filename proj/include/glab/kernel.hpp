#pragma once

#include "glab/geometry.hpp"

#include <span>

namespace glab {

/// (4 pi t)^{-n/2} exp(-|x|^2 / 4t), n = x.size().
double heat_kernel(double t, std::span<const double> x);

/// Heat kernel of the constant diagonal operator div(diag(d) grad).
double anisotropic_heat_kernel(double t, std::span<const double> x, std::span<const double> diag);

/// Periodized kernel on a torus with side lengths `period`, summing images
/// until they fall below 1e-17 relative.
double wrapped_heat_kernel(double t, std::span<const double> x, std::span<const double> period,
                           std::span<const double> diag = {});

} // namespace glab
