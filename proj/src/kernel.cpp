#include "glab/kernel.hpp"
#include "glab/errors.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace glab {

double heat_kernel(double t, std::span<const double> x) {
    return anisotropic_heat_kernel(t, x, {});
}

double anisotropic_heat_kernel(double t, std::span<const double> x, std::span<const double> diag) {
    if (!(t > 0.0)) return 0.0;
    if (!diag.empty() && diag.size() != x.size())
        throw PreconditionError("anisotropic_heat_kernel: diag size mismatch");
    double value = 1.0;
    for (std::size_t a = 0; a < x.size(); ++a) {
        const double d = diag.empty() ? 1.0 : diag[a];
        value *= std::exp(-x[a] * x[a] / (4.0 * d * t)) / std::sqrt(4.0 * std::numbers::pi * d * t);
    }
    return value;
}

double wrapped_heat_kernel(double t, std::span<const double> x, std::span<const double> period,
                           std::span<const double> diag) {
    if (!(t > 0.0)) return 0.0;
    if (period.size() != x.size()) throw PreconditionError("wrapped_heat_kernel: period size mismatch");
    // The kernel factorizes, so wrap each axis separately.
    double value = 1.0;
    for (std::size_t a = 0; a < x.size(); ++a) {
        const double d = diag.empty() ? 1.0 : diag[a];
        const double L = period[a];
        const double x0 = x[a] - L * std::round(x[a] / L);
        const double scale = 4.0 * d * t;
        const double norm = 1.0 / std::sqrt(std::numbers::pi * scale);
        double sum = std::exp(-x0 * x0 / scale);
        for (int m = 1;; ++m) {
            const double a1 = x0 + m * L, a2 = x0 - m * L;
            const double term = std::exp(-a1 * a1 / scale) + std::exp(-a2 * a2 / scale);
            sum += term;
            if (term < 1e-17 * sum || m > 100000) break;
        }
        value *= norm * sum;
    }
    return value;
}

} // namespace glab
