#pragma once

#include "glab/problem.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace glab::presets {

/// A^{ab}_{ij} = delta_ab delta_ij.
CoefficientField heat(int n, int N = 1);

/// Scalar, constant, diagonal in (a, b): A^{aa} = diag[a].
CoefficientField constant_diagonal(std::vector<double> diag);

/// a(t) delta_ab delta_ij with a(t) = mean + amp sin(2 pi t / period).
CoefficientField time_oscillating(int n, int N, double mean, double amp, double period);

/// Scalar a(x) = mean + amp sin(2 pi x_1 / wavelength) times delta_ab.
CoefficientField oscillatory(int n, double mean, double amp, double wavelength);

/// Scalar checkerboard: `high` where sum_a floor((x_a - origin) / width) is
/// even, `low` otherwise, times delta_ab.
CoefficientField checkerboard(int n, double low, double high, double width, double origin = 0.0);

/// Heat system plus a constant coupling `eps` in A^{11}_{12} (and in
/// A^{11}_{21} when `both`). Declared lambda is the exact form minimum.
CoefficientField almost_diagonal(int n, int N, double eps, bool both);

/// N = 2 system: A^{aa}(t) = R(omega t) diag(d1, d2) R(omega t)^T + c J,
/// J the rotation by 90 degrees. Nonsymmetric whenever c != 0.
CoefficientField rotating(int n, double d1, double d2, double skew, double omega);

/// Named preset with numeric parameters; unknown names or parameter keys
/// throw ParseError.
CoefficientField make(const std::string& name, int n, int N,
                      const std::map<std::string, double>& params = {});

/// Names accepted by `make`.
std::vector<std::string> names();

/// Gridded coefficient table. Format:
///   # n N nt nx [ny]
///   t,x[,y],alpha,beta,i,j,value        (indices 1-based)
/// Values are interpolated multilinearly and clamped outside the grid.
CoefficientField load_table(const std::filesystem::path& path, double lambda,
                            double Lambda_bound, double R_c = kInfinity);
CoefficientField parse_table(const std::string& text, double lambda, double Lambda_bound,
                             double R_c = kInfinity);

} // namespace glab::presets
