#include "glab/presets.hpp"
#include "glab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace glab::presets {

namespace {

using Traits = CoefficientField::Traits;

void fill_scalar(int n, int N, double value, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (int a = 0; a < n; ++a)
        for (int i = 0; i < N; ++i) out[((a * n + a) * N + i) * N + i] = value;
}

double param(const std::map<std::string, double>& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void reject_unknown(const std::string& preset, const std::map<std::string, double>& params,
                    std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : params) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ParseError("preset '" + preset + "' has no parameter '" + key + "'");
        if (!std::isfinite(value))
            throw ParseError("preset '" + preset + "' parameter '" + key + "' is not finite");
    }
}

} // namespace

CoefficientField heat(int n, int N) {
    return CoefficientField(
        n, N, [n, N](double, const Point&, std::span<double> out) { fill_scalar(n, N, 1.0, out); },
        1.0, std::sqrt(static_cast<double>(n * N)), kInfinity,
        Traits{.name = "heat", .depends_on_t = false, .depends_on_x = false});
}

CoefficientField constant_diagonal(std::vector<double> diag) {
    const int n = static_cast<int>(diag.size());
    if (n < 1 || n > kMaxDim) throw PreconditionError("constant preset needs 1 or 2 diagonal values");
    double lambda = kInfinity;
    double frob = 0.0;
    for (double d : diag) {
        if (!(d > 0.0)) throw PreconditionError("constant preset needs positive diagonal values");
        lambda = std::min(lambda, d);
        frob += d * d;
    }
    return CoefficientField(
        n, 1,
        [diag, n](double, const Point&, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
            for (int a = 0; a < n; ++a) out[a * n + a] = diag[a];
        },
        lambda, std::sqrt(frob), kInfinity,
        Traits{.name = "constant", .depends_on_t = false, .depends_on_x = false});
}

CoefficientField time_oscillating(int n, int N, double mean, double amp, double period) {
    if (!(mean > std::abs(amp))) throw PreconditionError("time preset needs mean > |amp|");
    if (!(period > 0.0)) throw PreconditionError("time preset needs a positive period");
    return CoefficientField(
        n, N,
        [=](double t, const Point&, std::span<double> out) {
            fill_scalar(n, N, mean + amp * std::sin(2.0 * std::numbers::pi * t / period), out);
        },
        mean - std::abs(amp), (mean + std::abs(amp)) * std::sqrt(static_cast<double>(n * N)),
        kInfinity, Traits{.name = "t-only", .depends_on_t = true, .depends_on_x = false});
}

CoefficientField oscillatory(int n, double mean, double amp, double wavelength) {
    if (!(mean > std::abs(amp))) throw PreconditionError("oscillatory preset needs mean > |amp|");
    if (!(wavelength > 0.0)) throw PreconditionError("oscillatory preset needs a positive wavelength");
    return CoefficientField(
        n, 1,
        [=](double, const Point& x, std::span<double> out) {
            fill_scalar(n, 1, mean + amp * std::sin(2.0 * std::numbers::pi * x[0] / wavelength), out);
        },
        mean - std::abs(amp), (mean + std::abs(amp)) * std::sqrt(static_cast<double>(n)), kInfinity,
        Traits{.name = "oscillatory", .depends_on_t = false, .depends_on_x = true});
}

CoefficientField checkerboard(int n, double low, double high, double width, double origin) {
    if (!(low > 0.0) || !(high > 0.0)) throw PreconditionError("checkerboard values must be positive");
    if (!(width > 0.0)) throw PreconditionError("checkerboard width must be positive");
    return CoefficientField(
        n, 1,
        [=](double, const Point& x, std::span<double> out) {
            long long parity = 0;
            for (int a = 0; a < n; ++a)
                parity += static_cast<long long>(std::floor((x[a] - origin) / width));
            fill_scalar(n, 1, (parity % 2 == 0) ? high : low, out);
        },
        std::min(low, high), std::max(low, high) * std::sqrt(static_cast<double>(n)), kInfinity,
        Traits{.name = "checkerboard", .depends_on_t = false, .depends_on_x = true});
}

CoefficientField almost_diagonal(int n, int N, double eps, bool both) {
    if (N < 2) throw PreconditionError("almost-diagonal preset needs N >= 2");
    const double lambda = 1.0 - (both ? std::abs(eps) : 0.5 * std::abs(eps));
    if (!(lambda > 0.0)) throw PreconditionError("almost-diagonal coupling destroys ellipticity");
    const double frob = std::sqrt(n * N + eps * eps * (both ? 2.0 : 1.0));
    return CoefficientField(
        n, N,
        [=](double, const Point&, std::span<double> out) {
            fill_scalar(n, N, 1.0, out);
            out[1] = eps;  // A^{11}_{12}
            if (both) out[N] = eps;  // A^{11}_{21}
        },
        lambda, frob, kInfinity,
        Traits{.name = "almost-diagonal", .depends_on_t = false, .depends_on_x = false});
}

CoefficientField rotating(int n, double d1, double d2, double skew, double omega) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw PreconditionError("rotating preset needs d1, d2 > 0");
    constexpr int N = 2;
    return CoefficientField(
        n, N,
        [=](double t, const Point&, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
            const double c = std::cos(omega * t);
            const double s = std::sin(omega * t);
            const double a11 = d1 * c * c + d2 * s * s;
            const double a22 = d1 * s * s + d2 * c * c;
            const double a12 = (d1 - d2) * c * s;
            for (int a = 0; a < n; ++a) {
                const int base = (a * n + a) * N * N;
                out[base + 0] = a11;
                out[base + 1] = a12 + skew;
                out[base + 2] = a12 - skew;
                out[base + 3] = a22;
            }
        },
        std::min(d1, d2), std::sqrt(n * (d1 * d1 + d2 * d2 + 2.0 * skew * skew)), kInfinity,
        Traits{.name = "rotating", .depends_on_t = omega != 0.0, .depends_on_x = false});
}

std::vector<std::string> names() {
    return {"heat", "constant", "t-only", "oscillatory", "checkerboard", "almost-diagonal",
            "rotating"};
}

CoefficientField make(const std::string& name, int n, int N,
                      const std::map<std::string, double>& p) {
    if (n < 1 || n > kMaxDim) throw ParseError("n must be 1 or 2");
    if (N < 1) throw ParseError("N must be >= 1");
    auto scalar_only = [&] {
        if (N != 1) throw ParseError("preset '" + name + "' is scalar (N = 1)");
    };
    if (name == "heat") {
        reject_unknown(name, p, {});
        return heat(n, N);
    }
    if (name == "constant") {
        scalar_only();
        reject_unknown(name, p, {"d1", "d2"});
        std::vector<double> diag{param(p, "d1", 2.0)};
        if (n == 2) diag.push_back(param(p, "d2", 0.5));
        return constant_diagonal(diag);
    }
    if (name == "t-only") {
        reject_unknown(name, p, {"mean", "amp", "period"});
        return time_oscillating(n, N, param(p, "mean", 1.5), param(p, "amp", 0.5),
                                param(p, "period", 0.1));
    }
    if (name == "oscillatory") {
        scalar_only();
        reject_unknown(name, p, {"mean", "amp", "wavelength"});
        return oscillatory(n, param(p, "mean", 2.0), param(p, "amp", 1.0),
                           param(p, "wavelength", 1.0));
    }
    if (name == "checkerboard") {
        scalar_only();
        reject_unknown(name, p, {"low", "high", "width", "origin"});
        return checkerboard(n, param(p, "low", 1.0), param(p, "high", 4.0),
                            param(p, "width", 0.125), param(p, "origin", 0.0));
    }
    if (name == "almost-diagonal") {
        reject_unknown(name, p, {"eps", "both"});
        return almost_diagonal(n, N, param(p, "eps", 0.1), param(p, "both", 0.0) != 0.0);
    }
    if (name == "rotating") {
        if (N != 2) throw ParseError("preset 'rotating' needs N = 2");
        reject_unknown(name, p, {"d1", "d2", "skew", "omega"});
        return rotating(n, param(p, "d1", 1.0), param(p, "d2", 2.0), param(p, "skew", 0.5),
                        param(p, "omega", 6.0));
    }
    throw ParseError("unknown coefficient preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Gridded tables

namespace {

struct Table {
    int n = 1;
    int N = 1;
    std::vector<double> ts;
    std::array<std::vector<double>, 2> xs;
    std::vector<double> data;  // [(it * nx + ix) * ny + iy][entry]
    std::size_t entries = 1;

    // Bracketing index and weight along one grid axis, clamped.
    static std::pair<std::size_t, double> locate(const std::vector<double>& grid, double v) {
        if (grid.size() == 1 || v <= grid.front()) return {0, 0.0};
        if (v >= grid.back()) return {grid.size() - 2, 1.0};
        const auto it = std::upper_bound(grid.begin(), grid.end(), v);
        const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
        const std::size_t lo = hi - 1;
        return {lo, (v - grid[lo]) / (grid[hi] - grid[lo])};
    }

    void eval(double t, const Point& x, std::span<double> out) const {
        const auto [it, wt] = locate(ts, t);
        const auto [ix, wx] = locate(xs[0], x[0]);
        const auto [iy, wy] = n == 2 ? locate(xs[1], x[1]) : std::pair<std::size_t, double>{0, 0.0};
        const std::size_t nt = ts.size();
        const std::size_t nx = xs[0].size();
        const std::size_t ny = n == 2 ? xs[1].size() : 1;
        std::fill(out.begin(), out.end(), 0.0);
        for (int dt = 0; dt < 2; ++dt) {
            const double w1 = dt ? wt : 1.0 - wt;
            const std::size_t jt = std::min(it + dt, nt - 1);
            if (w1 == 0.0) continue;
            for (int dx = 0; dx < 2; ++dx) {
                const double w2 = w1 * (dx ? wx : 1.0 - wx);
                const std::size_t jx = std::min(ix + dx, nx - 1);
                if (w2 == 0.0) continue;
                for (int dy = 0; dy < (n == 2 ? 2 : 1); ++dy) {
                    const double w3 = w2 * (n == 2 ? (dy ? wy : 1.0 - wy) : 1.0);
                    const std::size_t jy = std::min(iy + dy, ny - 1);
                    if (w3 == 0.0) continue;
                    const double* row = &data[((jt * nx + jx) * ny + jy) * entries];
                    for (std::size_t e = 0; e < entries; ++e) out[e] += w3 * row[e];
                }
            }
        }
    }
};

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

double to_number(const std::string& s, int line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (s.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("coefficient table line " + std::to_string(line_no) + ": bad number '" +
                         s + "'");
    }
}

} // namespace

CoefficientField parse_table(const std::string& text, double lambda, double Lambda_bound,
                             double R_c) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto table = std::make_shared<Table>();
    std::array<int, 4> dims{0, 0, 0, 0};  // nt nx ny(optional)
    bool have_header = false;
    struct Row {
        double t;
        Point x;
        int a, b, i, j;
        double v;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!have_header) {
            std::istringstream hs(line);
            std::string hash;
            hs >> hash;
            if (hash != "#") throw ParseError("coefficient table: missing '# n N nt nx [ny]' header");
            hs >> table->n >> table->N >> dims[0] >> dims[1];
            if (!hs) throw ParseError("coefficient table: malformed header");
            if (table->n == 2 && !(hs >> dims[2]))
                throw ParseError("coefficient table: 2-d header needs ny");
            if (table->n < 1 || table->n > 2 || table->N < 1 || dims[0] < 1 || dims[1] < 1 ||
                (table->n == 2 && dims[2] < 1))
                throw ParseError("coefficient table: header values out of range");
            have_header = true;
            continue;
        }
        if (line[0] == '#') continue;
        const auto f = split_csv(line);
        const int n = table->n;
        const std::size_t expected = static_cast<std::size_t>(n + 6);
        if (f.size() != expected)
            throw ParseError("coefficient table line " + std::to_string(line_no) + ": expected " +
                             std::to_string(expected) + " fields");
        Row r{};
        r.t = to_number(f[0], line_no);
        r.x[0] = to_number(f[1], line_no);
        if (n == 2) r.x[1] = to_number(f[2], line_no);
        r.a = static_cast<int>(to_number(f[n + 1], line_no)) - 1;
        r.b = static_cast<int>(to_number(f[n + 2], line_no)) - 1;
        r.i = static_cast<int>(to_number(f[n + 3], line_no)) - 1;
        r.j = static_cast<int>(to_number(f[n + 4], line_no)) - 1;
        r.v = to_number(f[n + 5], line_no);
        if (r.a < 0 || r.a >= n || r.b < 0 || r.b >= n || r.i < 0 || r.i >= table->N || r.j < 0 ||
            r.j >= table->N)
            throw ParseError("coefficient table line " + std::to_string(line_no) +
                             ": index out of range");
        if (!std::isfinite(r.v))
            throw ParseError("coefficient table line " + std::to_string(line_no) +
                             ": non-finite value");
        rows.push_back(r);
    }
    if (!have_header) throw ParseError("coefficient table: empty input");

    std::set<double> ts, xs, ys;
    for (const auto& r : rows) {
        ts.insert(r.t);
        xs.insert(r.x[0]);
        ys.insert(r.x[1]);
    }
    const int n = table->n;
    if (static_cast<int>(ts.size()) != dims[0] || static_cast<int>(xs.size()) != dims[1] ||
        (n == 2 && static_cast<int>(ys.size()) != dims[2]))
        throw ParseError("coefficient table: grid sizes do not match the header");
    table->ts.assign(ts.begin(), ts.end());
    table->xs[0].assign(xs.begin(), xs.end());
    if (n == 2) table->xs[1].assign(ys.begin(), ys.end());
    const int N = table->N;
    table->entries = static_cast<std::size_t>(n * n * N * N);
    const std::size_t ny = n == 2 ? table->xs[1].size() : 1;
    table->data.assign(table->ts.size() * table->xs[0].size() * ny * table->entries, 0.0);
    auto find = [](const std::vector<double>& grid, double v) {
        return static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), v) - grid.begin());
    };
    for (const auto& r : rows) {
        const std::size_t it = find(table->ts, r.t);
        const std::size_t ix = find(table->xs[0], r.x[0]);
        const std::size_t iy = n == 2 ? find(table->xs[1], r.x[1]) : 0;
        const std::size_t e = static_cast<std::size_t>(((r.a * n + r.b) * N + r.i) * N + r.j);
        table->data[((it * table->xs[0].size() + ix) * ny + iy) * table->entries + e] = r.v;
    }
    Traits traits{.name = "table",
                  .depends_on_t = table->ts.size() > 1,
                  .depends_on_x = table->xs[0].size() > 1 || ny > 1,
                  .from_table = true};
    return CoefficientField(
        n, N, [table](double t, const Point& x, std::span<double> out) { table->eval(t, x, out); },
        lambda, Lambda_bound, R_c, traits);
}

CoefficientField load_table(const std::filesystem::path& path, double lambda,
                            double Lambda_bound, double R_c) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open coefficient table '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_table(buffer.str(), lambda, Lambda_bound, R_c);
}

} // namespace glab::presets
