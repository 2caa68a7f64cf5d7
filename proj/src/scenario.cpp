#include "glab/scenario.hpp"
#include "glab/errors.hpp"
#include "glab/kernel.hpp"
#include "glab/parallel.hpp"
#include "glab/presets.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace glab {

using nlohmann::json;

namespace {

const std::map<std::string, std::set<std::string>>& check_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"parabolicity", {"samples"}},
        {"duality", {"count", "rhos", "sigmas", "tolerance"}},
        {"normalization", {"duration", "tolerance"}},
        {"semigroup", {"duration", "tolerance"}},
        {"oracle", {"steps", "tolerance"}},
        {"adjointness", {"steps", "tolerance"}},
        {"causality", {"duration"}},
        {"kernel", {"duration", "tolerance"}},
        {"pointwise_decay", {"radii", "rho", "margin"}},
        {"gaussian", {"durations", "c_max"}},
        {"gaffney", {"distances", "durations", "half_width", "slack"}},
        {"davies", {"gammas", "duration", "cap", "slack"}},
        {"weak_lp", {"levels", "gradient_levels", "duration", "rho", "margin"}},
        {"ph", {"solutions", "ladder", "time", "min_mu0", "seed"}},
        {"local_boundedness", {"radius", "time", "stability"}},
        {"initial_trace", {"width", "steps", "tolerance"}},
        {"bounded_initial", {"duration", "width"}},
    };
    return keys;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + ": expected an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ParseError(where + ": unknown key '" + key + "'");
}

double number(const json& v, const std::string& what) {
    if (!v.is_number()) throw ParseError(what + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(what + ": must be finite");
    return d;
}

int integer(const json& v, const std::string& what) {
    if (!v.is_number_integer()) throw ParseError(what + ": expected an integer");
    return v.get<int>();
}

std::vector<double> numbers(const json& v, const std::string& what) {
    std::vector<double> out;
    if (v.is_number()) {
        out.push_back(number(v, what));
    } else if (v.is_array()) {
        for (const auto& e : v) out.push_back(number(e, what));
    } else {
        throw ParseError(what + ": expected a number or a list of numbers");
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

int snap_steps(const Mesh& mesh, double duration) {
    return static_cast<int>(std::lround(duration / mesh.tau()));
}

int cyl_steps(const Mesh& mesh, double r) {
    return static_cast<int>(std::floor(r * r / mesh.tau() + 1e-9));
}

bool has_closed_form_kernel(const CoefficientField& c, const Mesh& mesh) {
    return mesh.periodic() && !c.depends_on_x() && !c.depends_on_t();
}

std::vector<double> kernel_diag(const CoefficientField& c, const Mesh& mesh) {
    std::vector<double> diag;
    for (int a = 0; a < mesh.dim(); ++a) diag.push_back(c(mesh.t0(), mesh.center(0), a, a, 0, 0));
    return diag;
}

double kernel_at(const CoefficientField& c, const Mesh& mesh, double dt, const Point& d) {
    std::vector<double> period;
    for (int a = 0; a < mesh.dim(); ++a) period.push_back(mesh.domain().length(a));
    const auto diag = kernel_diag(c, mesh);
    return wrapped_heat_kernel(dt, std::span<const double>(d.data(), static_cast<std::size_t>(mesh.dim())),
                               period, diag);
}

CheckRecord from_fit(std::string name, std::string anchor, const BoundFit& fit, bool pass,
                     double threshold, std::string xlabel, std::string ylabel) {
    CheckRecord rec;
    rec.name = std::move(name);
    rec.anchor = std::move(anchor);
    rec.tolerance = threshold;
    rec.status = pass ? Status::pass : Status::fail;
    rec.samples = fit.samples.size();
    rec.fitted["exponent"] = fit.exponent;
    rec.fitted["constant"] = fit.constant;
    rec.fitted["r2"] = fit.r2;
    rec.fitted["x_min"] = fit.x_min;
    rec.fitted["x_max"] = fit.x_max;
    rec.columns = {std::move(xlabel), std::move(ylabel)};
    for (const auto& [x, y] : fit.samples) rec.rows.push_back({x, y});
    rec.message = "fitted exponent " + fmt(fit.exponent) + " (threshold " + fmt(threshold) + ", r2 " +
                  fmt(fit.r2) + ")";
    return rec;
}

Slice bump(const Mesh& mesh, int N, const Point& x0, double width) {
    Slice g(static_cast<Eigen::Index>(mesh.num_cells()) * N);
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const double d = mesh.distance(c, x0);
        g.segment(static_cast<Eigen::Index>(c) * N, N).setConstant(std::exp(-d * d / (width * width)));
    }
    return g;
}

} // namespace

double CheckSpec::scalar(const std::string& key, double fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    if (it->second.size() != 1) throw ParseError("check '" + name + "': '" + key + "' must be a single number");
    return it->second.front();
}

std::vector<double> CheckSpec::list(const std::string& key, std::vector<double> fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [k, _] : check_keys()) v.push_back(k);
        return v;
    }();
    return names;
}

Domain Scenario::domain() const {
    Domain d;
    d.n = n;
    d.mode = mode;
    for (int a = 0; a < n; ++a) {
        d.lo[static_cast<std::size_t>(a)] = box_lo[static_cast<std::size_t>(a)];
        d.hi[static_cast<std::size_t>(a)] = box_hi[static_cast<std::size_t>(a)];
    }
    return d;
}

Mesh Scenario::mesh() const {
    std::array<int, 2> c{1, 1};
    for (int a = 0; a < n; ++a) c[static_cast<std::size_t>(a)] = cells[static_cast<std::size_t>(a)];
    return Mesh(domain(), c, tau, t0);
}

CoefficientField Scenario::coefficients() const {
    CoefficientField c = preset.empty()
                             ? presets::load_table(table, lambda.value(), Lambda_bound.value(),
                                                   R_c.value_or(kInfinity))
                             : presets::make(preset, n, N, params);
    if (c.dim() != n || c.system_size() != N)
        throw ParseError("coefficient source does not match n / N");
    if (!preset.empty() && (lambda || Lambda_bound || R_c))
        c = c.with_constants(lambda.value_or(c.lambda()), Lambda_bound.value_or(c.Lambda_bound()),
                             R_c.value_or(c.R_c()));
    return c;
}

GridPoint Scenario::pole(const Mesh& m, std::size_t i) const {
    const PoleSpec& p = poles.at(i);
    Point x{0.0, 0.0};
    for (int a = 0; a < n; ++a) x[static_cast<std::size_t>(a)] = p.x[static_cast<std::size_t>(a)];
    return GridPoint{snap_steps(m, p.t - m.t0()), m.nearest_cell(x)};
}

Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
    }
    reject_unknown(doc, {"name", "preset", "table", "params", "n", "N", "lambda", "Lambda_bound",
                         "R_c", "theta", "mesh", "green", "checks", "output"},
                   "scenario");
    Scenario s;
    if (doc.contains("name")) {
        if (!doc["name"].is_string()) throw ParseError("name: expected a string");
        s.name = doc["name"].get<std::string>();
    }
    if (doc.contains("preset") == doc.contains("table"))
        throw ParseError("scenario: give exactly one of 'preset' or 'table'");
    if (doc.contains("preset")) {
        if (!doc["preset"].is_string()) throw ParseError("preset: expected a string");
        s.preset = doc["preset"].get<std::string>();
        const auto names = presets::names();
        if (std::find(names.begin(), names.end(), s.preset) == names.end())
            throw ParseError("unknown preset '" + s.preset + "'");
    } else {
        if (!doc["table"].is_string()) throw ParseError("table: expected a path string");
        s.table = doc["table"].get<std::string>();
        if (s.table.is_relative() && !base_dir.empty()) s.table = base_dir / s.table;
        if (!doc.contains("lambda") || !doc.contains("Lambda_bound"))
            throw ParseError("table scenarios must declare lambda and Lambda_bound");
    }
    if (doc.contains("params")) {
        if (!doc["params"].is_object()) throw ParseError("params: expected an object");
        for (const auto& [k, v] : doc["params"].items()) s.params[k] = number(v, "params." + k);
    }
    if (!doc.contains("n")) throw ParseError("scenario: missing 'n'");
    s.n = integer(doc["n"], "n");
    if (s.n < 1 || s.n > kMaxDim) throw ParseError("n must be 1 or 2");
    s.N = doc.contains("N") ? integer(doc["N"], "N") : 1;
    if (s.N < 1) throw ParseError("N must be >= 1");
    if (doc.contains("lambda")) s.lambda = number(doc["lambda"], "lambda");
    if (doc.contains("Lambda_bound")) s.Lambda_bound = number(doc["Lambda_bound"], "Lambda_bound");
    if (doc.contains("R_c")) s.R_c = number(doc["R_c"], "R_c");
    if (s.lambda && !(*s.lambda > 0.0)) throw ParseError("lambda must be positive");
    if (s.Lambda_bound && s.lambda && *s.Lambda_bound < *s.lambda)
        throw ParseError("Lambda_bound must be >= lambda");
    if (s.R_c && !(*s.R_c > 0.0)) throw ParseError("R_c must be positive");
    if (doc.contains("theta")) s.theta = number(doc["theta"], "theta");
    if (!(s.theta >= 0.5 && s.theta <= 1.0))
        throw ParseError("theta = " + fmt(s.theta) + " violates the contract theta in [1/2, 1]");

    if (!doc.contains("mesh")) throw ParseError("scenario: missing 'mesh'");
    const json& m = doc["mesh"];
    reject_unknown(m, {"cells", "tau", "t0", "boundary_mode", "box"}, "mesh");
    if (!m.contains("cells") || !m.contains("tau")) throw ParseError("mesh: needs 'cells' and 'tau'");
    for (double c : numbers(m["cells"], "mesh.cells")) {
        if (c != std::floor(c) || c < 4) throw ParseError("mesh.cells: integers >= 4 required");
        s.cells.push_back(static_cast<int>(c));
    }
    if (static_cast<int>(s.cells.size()) != s.n) throw ParseError("mesh.cells: need one entry per axis");
    s.tau = number(m["tau"], "mesh.tau");
    if (!(s.tau > 0.0)) throw ParseError("mesh.tau must be positive");
    if (m.contains("t0")) s.t0 = number(m["t0"], "mesh.t0");
    if (m.contains("boundary_mode")) {
        if (!m["boundary_mode"].is_string()) throw ParseError("mesh.boundary_mode: expected a string");
        s.mode = boundary_mode_from_string(m["boundary_mode"].get<std::string>());
    }
    s.box_lo.assign(static_cast<std::size_t>(s.n), 0.0);
    s.box_hi.assign(static_cast<std::size_t>(s.n), 1.0);
    if (m.contains("box")) {
        reject_unknown(m["box"], {"lo", "hi"}, "mesh.box");
        if (m["box"].contains("lo")) s.box_lo = numbers(m["box"]["lo"], "mesh.box.lo");
        if (m["box"].contains("hi")) s.box_hi = numbers(m["box"]["hi"], "mesh.box.hi");
        if (static_cast<int>(s.box_lo.size()) != s.n || static_cast<int>(s.box_hi.size()) != s.n)
            throw ParseError("mesh.box: need one entry per axis");
    }
    for (int a = 0; a < s.n; ++a)
        if (!(s.box_hi[static_cast<std::size_t>(a)] > s.box_lo[static_cast<std::size_t>(a)]))
            throw ParseError("mesh.box: hi must exceed lo");

    if (doc.contains("green")) {
        const json& g = doc["green"];
        reject_unknown(g, {"poles", "rho_list", "sigma"}, "green");
        if (g.contains("poles")) {
            if (!g["poles"].is_array()) throw ParseError("green.poles: expected a list");
            for (const auto& p : g["poles"]) {
                reject_unknown(p, {"t", "x"}, "green.poles[]");
                if (!p.contains("t") || !p.contains("x")) throw ParseError("green.poles[]: needs 't' and 'x'");
                PoleSpec ps{number(p["t"], "pole.t"), numbers(p["x"], "pole.x")};
                if (static_cast<int>(ps.x.size()) != s.n) throw ParseError("pole.x: need one entry per axis");
                s.poles.push_back(std::move(ps));
            }
        }
        if (g.contains("rho_list")) s.rho_list = numbers(g["rho_list"], "green.rho_list");
        if (g.contains("sigma")) s.sigma = number(g["sigma"], "green.sigma");
        for (std::size_t i = 1; i < s.rho_list.size(); ++i)
            if (!(s.rho_list[i] < s.rho_list[i - 1])) throw ParseError("green.rho_list must be decreasing");
    }

    if (!doc.contains("checks") || !doc["checks"].is_array())
        throw ParseError("scenario: 'checks' must be a list");
    for (const auto& c : doc["checks"]) {
        CheckSpec cs;
        if (c.is_string()) {
            cs.name = c.get<std::string>();
        } else if (c.is_object() && c.contains("name") && c["name"].is_string()) {
            cs.name = c["name"].get<std::string>();
        } else {
            throw ParseError("checks[]: expected a name or an object with 'name'");
        }
        auto it = check_keys().find(cs.name);
        if (it == check_keys().end()) throw ParseError("unknown check '" + cs.name + "'");
        if (c.is_object()) {
            std::set<std::string> allowed = it->second;
            allowed.insert("name");
            reject_unknown(c, allowed, "check '" + cs.name + "'");
            for (const auto& [k, v] : c.items())
                if (k != "name") cs.params[k] = numbers(v, cs.name + "." + k);
        }
        s.checks.push_back(std::move(cs));
    }
    if (doc.contains("output")) {
        if (!doc["output"].is_string()) throw ParseError("output: expected a path string");
        s.output = doc["output"].get<std::string>();
    }

    // Cross-field validation before any solve.
    static const std::set<std::string> need_pole = {"causality", "kernel", "pointwise_decay", "gaussian",
                                                    "gaffney", "davies", "weak_lp", "ph",
                                                    "local_boundedness", "initial_trace", "bounded_initial"};
    static const std::set<std::string> need_rho = {"causality", "kernel"};
    for (const auto& c : s.checks) {
        if (need_pole.count(c.name) && s.poles.empty())
            throw ParseError("check '" + c.name + "' needs green.poles");
        if (need_rho.count(c.name) && s.rho_list.empty())
            throw ParseError("check '" + c.name + "' needs green.rho_list");
        if (c.name == "duality" && !c.has("rhos") && s.rho_list.empty())
            throw ParseError("check 'duality' needs rhos or green.rho_list");
        if (c.name == "duality" && !c.has("sigmas") && !(s.sigma > 0.0))
            throw ParseError("check 'duality' needs sigmas or green.sigma");
        if (c.name == "pointwise_decay" && !c.has("radii")) throw ParseError("check 'pointwise_decay' needs radii");
        if (c.name == "weak_lp" && !c.has("levels")) throw ParseError("check 'weak_lp' needs levels");
        if (c.name == "ph" && !c.has("ladder")) throw ParseError("check 'ph' needs ladder");
        if (c.name == "local_boundedness" && !c.has("radius"))
            throw ParseError("check 'local_boundedness' needs radius");
    }
    try {
        const Mesh mesh = s.mesh();
        (void)s.coefficients();
        const double rmin = min_resolvable_radius(mesh);
        for (double r : s.rho_list)
            if (r < rmin * (1.0 - 1e-12))
                throw ParseError("green.rho_list: radius " + fmt(r) + " below resolution " + fmt(rmin));
        if (s.sigma > 0.0 && s.sigma < rmin * (1.0 - 1e-12))
            throw ParseError("green.sigma below resolution " + fmt(rmin));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(e.what());
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read scenario " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    Scenario s = parse_scenario(buf.str(), path.parent_path());
    if (s.name == "scenario") s.name = path.stem().string();
    return s;
}

namespace {

void run_check(const Scenario& sc, const CheckSpec& c, const ThetaStepper& stepper,
               const RunOptions& opt, VerificationReport& report) {
    const Mesh& mesh = stepper.mesh();
    const CoefficientField coeffs = stepper.spec().effective();
    const int N = stepper.N();
    const Eigen::Index S = stepper.slice_size();

    if (c.name == "parabolicity") {
        report.add(check_parabolicity(coeffs, mesh.domain(), mesh.t0(), mesh.t0() + 1.0,
                                      static_cast<int>(c.scalar("samples", 256))));
    } else if (c.name == "duality") {
        const auto rhos = c.list("rhos", sc.rho_list);
        const auto sigmas = c.list("sigmas", {sc.sigma});
        int m_rho = 0, m_sigma = 0;
        for (double r : rhos) m_rho = std::max(m_rho, cyl_steps(mesh, r));
        for (double r : sigmas) m_sigma = std::max(m_sigma, cyl_steps(mesh, r));
        const int k_hi = m_rho + m_sigma + std::max(4, m_rho + m_sigma);
        const auto cases = make_duality_cases(mesh, N, static_cast<int>(c.scalar("count", 20)), rhos,
                                              sigmas, 0, k_hi);
        report.add(check_duality(stepper, cases, c.scalar("tolerance", 1e-10), opt.jobs));
    } else if (c.name == "normalization") {
        const int k = std::max(1, snap_steps(mesh, c.scalar("duration", 10 * mesh.tau())));
        report.add(check_normalization(stepper, 0, k, c.scalar("tolerance", 1e-12)));
    } else if (c.name == "semigroup") {
        const int k = std::max(2, snap_steps(mesh, c.scalar("duration", 10 * mesh.tau())));
        report.add(check_semigroup(stepper, 0, k / 2, k, c.scalar("tolerance", 1e-12)));
    } else if (c.name == "oracle") {
        const int steps = static_cast<int>(c.scalar("steps", 5));
        if (static_cast<Eigen::Index>(steps) * S > kDenseOracleCap) {
            CheckRecord rec;
            rec.name = "oracle_equivalence";
            rec.anchor = "dense-oracle";
            rec.tolerance = c.scalar("tolerance", 1e-9);
            rec.message = "skipped: space-time system above the dense oracle cap";
            report.add(rec);
            return;
        }
        std::vector<Slice> f;
        for (int j = 0; j < steps; ++j) f.push_back(random_smooth_slice(mesh, N, 2, 40 + j));
        report.add(check_oracle_equivalence(stepper, random_smooth_slice(mesh, N, 3, 11),
                                            slice_source(f, 0), 0, steps, c.scalar("tolerance", 1e-9)));
    } else if (c.name == "adjointness") {
        const int steps = static_cast<int>(c.scalar("steps", 20));
        report.add(check_adjointness(stepper, random_smooth_slice(mesh, N, 3, 12),
                                     random_smooth_slice(mesh, N, 3, 13), 0, steps,
                                     c.scalar("tolerance", 1e-12)));
    } else if (c.name == "causality") {
        const GridPoint pole = sc.pole(mesh, 0);
        const double rho = sc.rho_list.front();
        const int k_T = pole.k + std::max(cyl_steps(mesh, rho), snap_steps(mesh, c.scalar("duration", 10 * mesh.tau())));
        report.add(check_causality(stepper, pole, rho, k_T));
    } else if (c.name == "kernel") {
        const GridPoint pole = sc.pole(mesh, 0);
        const int k_t = pole.k + snap_steps(mesh, c.scalar("duration", 0.05));
        report.add(check_kernel_oracle(stepper, pole, sc.rho_list, k_t, c.scalar("tolerance", 0.02)));
    } else if (c.name == "pointwise_decay") {
        const GridPoint pole = sc.pole(mesh, 0);
        const auto radii = c.list("radii", {});
        const double rho = c.scalar("rho", 0.0);
        int k_T = pole.k + 1;
        for (double r : radii) k_T = std::max(k_T, pole.k + snap_steps(mesh, r * r) + 1);
        const GreenBlock block = green_block(stepper, pole, rho, k_T);
        const double margin = c.scalar("margin", 0.15);
        const DecayFit fit = fit_pointwise_decay(block, radii, margin);
        report.add(from_fit("pointwise_decay", "pointwise-decay", fit.fit, fit.pass,
                            -mesh.dim() + margin, "parabolic_distance", "green_op_norm"));
    } else if (c.name == "gaussian") {
        const GridPoint pole = sc.pole(mesh, 0);
        std::vector<int> steps;
        for (double d : c.list("durations", {0.02, 0.05, 0.1, 0.2, 0.5, 1.0}))
            steps.push_back(std::max(1, snap_steps(mesh, d)));
        const GreenBlock block = green_block(stepper, pole, 0.0, pole.k + *std::max_element(steps.begin(), steps.end()));
        const GaussianFit fit = fit_gaussian(block, steps, coeffs.lambda(), coeffs.Lambda_bound(),
                                             c.scalar("c_max", 10.0));
        CheckRecord rec;
        rec.name = "gaussian";
        rec.anchor = "gaussian-upper-bound";
        rec.tolerance = fit.kappa_required;
        rec.status = fit.pass ? Status::pass : Status::fail;
        rec.samples = fit.samples;
        rec.fitted["kappa_fit"] = fit.kappa_fit;
        rec.fitted["kappa_required"] = fit.kappa_required;
        rec.fitted["constant_at_required"] = fit.constant_at_required;
        rec.columns = {"t_minus_s", "distance", "green_op_norm"};
        for (const auto& p : fit.points) rec.rows.push_back({p[0], p[1], p[2]});
        rec.message = "kappa_fit " + fmt(fit.kappa_fit) + " vs required " + fmt(fit.kappa_required);
        report.add(rec);
    } else if (c.name == "gaffney") {
        const Point center = mesh.center(sc.pole(mesh, 0).cell);
        const double hw = c.scalar("half_width", 0.25);
        for (double d : c.list("distances", {0.25, 0.5, 1.0}))
            for (double T : c.list("durations", {0.1, 0.5})) {
                const GaffneySets sets = gaffney_sets(mesh, center, hw, d);
                Slice g = Slice::Zero(S);
                for (int cell : sets.F) g.segment(static_cast<Eigen::Index>(cell) * N, N).setOnes();
                CheckRecord rec = check_gaffney(stepper, sets, g, 0, std::max(1, snap_steps(mesh, T)),
                                                c.scalar("slack", 1.05));
                rec.name = "gaffney[d=" + fmt(d) + ",dt=" + fmt(T) + "]";
                report.add(rec);
            }
    } else if (c.name == "davies") {
        const Point center = mesh.center(sc.pole(mesh, 0).cell);
        double L = kInfinity;
        for (int a = 0; a < mesh.dim(); ++a) L = std::min(L, mesh.domain().length(a));
        const double cap = c.scalar("cap", 0.25 * L);
        const Slice f = random_smooth_slice(mesh, N, 3, 21);
        const int k = std::max(1, snap_steps(mesh, c.scalar("duration", 0.5)));
        for (double gamma : c.list("gammas", {0.0, 0.5, 1.0, 2.0})) {
            CheckRecord rec = davies_growth(stepper, davies_weight(mesh, center, gamma, cap), gamma, f, 0, k,
                                            c.scalar("slack", 1.05));
            rec.name = "davies[gamma=" + fmt(gamma) + "]";
            report.add(rec);
        }
    } else if (c.name == "weak_lp") {
        const GridPoint pole = sc.pole(mesh, 0);
        const double rho = c.scalar("rho", sc.rho_list.empty() ? min_resolvable_radius(mesh)
                                                               : sc.rho_list.back());
        const GreenColumn col = averaged_green_column(stepper, pole, 0, rho,
                                                      pole.k + snap_steps(mesh, c.scalar("duration", 0.5)));
        const double margin = c.scalar("margin", 0.2);
        const LevelFit v = weak_lp_levels(col, c.list("levels", {}), false, margin);
        CheckRecord rv = from_fit("weak_lp_value", "weak-lp-value", v.fit, v.pass, v.threshold, "level", "measure");
        rv.fitted["rho"] = rho;
        report.add(rv);
        if (c.has("gradient_levels")) {
            const LevelFit gfit = weak_lp_levels(col, c.list("gradient_levels", {}), true, margin);
            CheckRecord rg = from_fit("weak_lp_gradient", "weak-lp-gradient", gfit.fit, gfit.pass,
                                      gfit.threshold, "level", "measure");
            rg.fitted["rho"] = rho;
            report.add(rg);
        }
    } else if (c.name == "ph") {
        const GridPoint pole = sc.pole(mesh, 0);
        const int k_end = std::max(1, snap_steps(mesh, c.scalar("time", 0.02)));
        const int count = static_cast<int>(c.scalar("solutions", 10));
        const auto seed = static_cast<std::uint64_t>(c.scalar("seed", 100));
        std::vector<Trajectory> sols(static_cast<std::size_t>(count), Trajectory{mesh, N, 0, {}});
        std::vector<ThetaStepper> copies(static_cast<std::size_t>(std::max(1, opt.jobs)), stepper);
        parallel_for(sols.size(), opt.jobs, [&](std::size_t i, int w) {
            sols[i] = solve_forward(copies[static_cast<std::size_t>(w)], random_smooth_slice(mesh, N, 3, seed + i),
                                    no_source(), 0, k_end);
        });
        const auto ladder = c.list("ladder", {});
        const PhFit fit = ph_decay_fit(stepper.spec(), sols, GridPoint{k_end, pole.cell}, ladder,
                                       c.scalar("min_mu0", 0.9));
        CheckRecord rec;
        rec.name = "ph_energy_decay";
        rec.anchor = "interior-energy-decay";
        rec.tolerance = c.scalar("min_mu0", 0.9);
        rec.status = fit.applicable ? (fit.pass ? Status::pass : Status::fail) : Status::informational;
        rec.samples = sols.size();
        rec.fitted["mu0"] = fit.mu0;
        rec.fitted["C0"] = fit.C0;
        rec.fitted["exponent"] = fit.exponent;
        rec.fitted["min_r2"] = fit.min_r2;
        rec.columns = {"solution", "rho", "energy"};
        for (std::size_t i = 0; i < fit.fits.size(); ++i)
            for (const auto& [x, y] : fit.fits[i].samples) rec.rows.push_back({double(i), x, y});
        rec.message = std::string(fit.applicable ? "" : "coefficients depend on x; ") + "worst mu0 " +
                      fmt(fit.mu0) + ", C0 " + fmt(fit.C0);
        report.add(rec);
    } else if (c.name == "local_boundedness") {
        const GridPoint pole = sc.pole(mesh, 0);
        const double R = c.scalar("radius", 0.0);
        const double t = mesh.time(std::max(cyl_steps(mesh, R) + 1, snap_steps(mesh, c.scalar("time", 2.0 * R * R))));
        ThetaStepper fine(mesh.refined(2, 4), stepper.spec(), stepper.theta());
        const Domain& dom = mesh.domain();
        auto data = [&](const Point& x) {
            Eigen::VectorXd v(N);
            v.setConstant(1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * (x[0] - dom.lo[0]) / dom.length(0)));
            return v;
        };
        report.add(check_local_boundedness(stepper, fine, data, mesh.t0(), t, mesh.center(pole.cell), R,
                                           c.scalar("stability", 0.2)));
    } else if (c.name == "initial_trace") {
        const GridPoint pole = sc.pole(mesh, 0);
        std::vector<int> steps;
        for (double v : c.list("steps", {256, 128, 64, 32, 16, 8, 4})) steps.push_back(static_cast<int>(v));
        const Slice g = bump(mesh, N, mesh.center(pole.cell), c.scalar("width", 0.1));
        report.add(initial_trace_test(stepper, g, 0, pole.cell, steps, c.scalar("tolerance", 0.02)));
    } else if (c.name == "bounded_initial") {
        const GridPoint pole = sc.pole(mesh, 0);
        const Point x = mesh.center(pole.cell);
        Slice g = Slice::Zero(S);
        for (int cell : mesh.ball(x, c.scalar("width", 0.25)))
            g.segment(static_cast<Eigen::Index>(cell) * N, N).setOnes();
        report.add(check_bounded_initial(stepper, g, 0,
                                         std::max(1, snap_steps(mesh, c.scalar("duration", 10 * mesh.tau()))), x));
    }
}

} // namespace

VerificationReport run_scenario(const Scenario& scenario, const RunOptions& options) {
    VerificationReport report;
    report.scenario = scenario.name;
    const ThetaStepper stepper(scenario.mesh(), scenario.spec(), scenario.theta);
    for (const auto& c : scenario.checks) run_check(scenario, c, stepper, options, report);
    return report;
}

std::string report_json(const VerificationReport& report) {
    json doc;
    doc["scenario"] = report.scenario;
    doc["all_passed"] = report.all_passed();
    doc["failures"] = report.failures();
    json records = json::array();
    for (const auto& r : report.records) {
        json j;
        j["name"] = r.name;
        j["anchor"] = r.anchor;
        j["status"] = to_string(r.status);
        j["tolerance"] = r.tolerance;
        j["samples"] = r.samples;
        j["message"] = r.message;
        json fitted = json::object();
        for (const auto& [k, v] : r.fitted) fitted[k] = std::isfinite(v) ? json(v) : json(nullptr);
        j["fitted"] = fitted;
        records.push_back(j);
    }
    doc["records"] = records;
    return doc.dump(2) + "\n";
}

std::string report_summary(const VerificationReport& report) {
    std::ostringstream os;
    os << "scenario: " << report.scenario << "\n";
    for (const auto& r : report.records)
        os << (r.status == Status::pass ? "PASS" : r.status == Status::fail ? "FAIL" : "INFO") << "  "
           << r.name << " [" << r.anchor << "] " << r.message << "\n";
    os << (report.all_passed() ? "all checks passed" : std::to_string(report.failures()) + " check(s) failed")
       << "\n";
    return os.str();
}

std::string record_csv(const CheckRecord& record) {
    std::ostringstream os;
    for (std::size_t i = 0; i < record.columns.size(); ++i) os << (i ? "," : "") << record.columns[i];
    os << "\n";
    for (const auto& row : record.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << fmt17(row[i]);
        os << "\n";
    }
    return os.str();
}

void write_report(const VerificationReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error("cannot write " + p.string());
        out << text;
    };
    write(dir / "report.json", report_json(report));
    write(dir / "summary.txt", report_summary(report));
    for (std::size_t i = 0; i < report.records.size(); ++i) {
        const auto& r = report.records[i];
        if (r.rows.empty()) continue;
        std::string stem = r.name;
        for (char& ch : stem)
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '.') ch = '_';
        std::ostringstream name;
        name.width(2);
        name.fill('0');
        name << i;
        write(dir / (name.str() + "_" + stem + ".csv"), record_csv(r));
    }
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    if (name == "h") return SweepAxis::h;
    if (name == "tau") return SweepAxis::tau;
    if (name == "rho") return SweepAxis::rho;
    throw ParseError("unknown sweep axis '" + name + "' (expected h, tau or rho)");
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::h: return "h";
    case SweepAxis::tau: return "tau";
    case SweepAxis::rho: return "rho";
    }
    return "?";
}

SweepResult run_sweep(const Scenario& scenario, SweepAxis axis, const std::vector<double>& values,
                      const RunOptions& options) {
    if (values.empty()) throw ParseError("sweep: need at least one value");
    const bool inc = values.size() < 2 || values[1] > values[0];
    for (std::size_t i = 1; i < values.size(); ++i)
        if ((values[i] > values[i - 1]) != inc || values[i] == values[i - 1])
            throw ParseError("sweep: values must be strictly monotone");
    for (double v : values)
        if (!(v > 0.0)) throw ParseError("sweep: values must be positive");
    if (scenario.poles.empty()) throw ParseError("sweep: scenario needs green.poles");

    double duration = 0.05;
    for (const auto& c : scenario.checks)
        if (c.name == "kernel") duration = c.scalar("duration", duration);

    const Mesh base = scenario.mesh();
    const CoefficientField coeffs = scenario.coefficients();
    const bool analytic = has_closed_form_kernel(coeffs, base);

    struct Run {
        Mesh mesh;
        GridPoint pole;
        int k_t;
        GreenColumn col;
    };
    auto build = [&](double v) {
        Scenario s = scenario;
        double rho = 0.0;
        if (axis == SweepAxis::h) {
            const double ratio = scenario.tau / (base.h(0) * base.h(0));
            for (int a = 0; a < s.n; ++a) {
                const double L = base.domain().length(a);
                const int c = static_cast<int>(std::lround(L / v)) - (base.periodic() ? 0 : 1);
                if (c < 4) throw ParseError("sweep: h too coarse");
                s.cells[static_cast<std::size_t>(a)] = c;
            }
            s.tau = ratio * v * v;
        } else if (axis == SweepAxis::tau) {
            s.tau = v;
        } else {
            rho = v;
        }
        const Mesh mesh = s.mesh();
        const ThetaStepper st(mesh, s.spec(), s.theta);
        GridPoint pole = s.pole(mesh, 0);
        if (rho > 0.0) pole.k = std::max(pole.k, cyl_steps(mesh, rho) + 1);
        const int k_t = pole.k + std::max(1, snap_steps(mesh, duration));
        GreenColumn col = rho > 0.0 ? averaged_green_column(st, pole, 0, rho, k_t)
                                    : cell_green_column(st, pole, 0, k_t);
        return Run{mesh, pole, k_t, std::move(col)};
    };
    std::vector<std::optional<Run>> runs(values.size());
    parallel_for(values.size(), options.jobs, [&](std::size_t i, int) { runs[i].emplace(build(values[i])); });

    SweepResult out;
    out.axis = axis;
    out.reference = analytic ? "analytic" : "finest";
    // Comparison points: cells of the coarsest run within 3 sqrt(t - s) of the pole.
    const std::size_t coarse = inc ? values.size() - 1 : 0;
    const std::size_t finest = inc ? 0 : values.size() - 1;
    const Run& cr = *runs[coarse];
    const double dt_c = cr.mesh.time(cr.k_t) - cr.mesh.time(cr.pole.k);
    const Point y = cr.mesh.center(cr.pole.cell);
    std::vector<Point> probes;
    for (int c = 0; c < cr.mesh.num_cells(); ++c)
        if (cr.mesh.distance(c, y) <= 3.0 * std::sqrt(dt_c)) probes.push_back(cr.mesh.center(c));

    auto sample = [&](const Run& r, const Point& x) {
        return r.col.value(r.k_t, r.mesh.nearest_cell(x), 0);
    };
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Run& r = *runs[i];
        const double dt = r.mesh.time(r.k_t) - r.mesh.time(r.pole.k);
        const Point yr = r.mesh.center(r.pole.cell);
        double err = 0.0, peak = 0.0;
        for (const Point& x : probes) {
            const double v = sample(r, x);
            double ref;
            if (analytic) {
                ref = kernel_at(coeffs, r.mesh, dt, r.mesh.displacement(r.mesh.nearest_cell(x), yr));
            } else {
                ref = sample(*runs[finest], x);
            }
            err = std::max(err, std::abs(v - ref));
            peak = std::max(peak, std::abs(ref));
        }
        out.rows.push_back({values[i], peak > 0.0 ? err / peak : err, probes.size()});
    }
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        if (!analytic && i == finest) continue;
        xs.push_back(out.rows[i].value);
        ys.push_back(out.rows[i].error);
    }
    if (xs.size() >= 2) {
        const BoundFit fit = fit_power_law(xs, ys);
        if (std::isfinite(fit.exponent)) out.observed_order = fit.exponent;
    }
    return out;
}

std::string sweep_csv(const SweepResult& result) {
    std::ostringstream os;
    os << "# axis " << to_string(result.axis) << ", reference " << result.reference;
    if (result.observed_order) os << ", observed_order " << fmt17(*result.observed_order);
    os << "\n" << to_string(result.axis) << ",error,samples\n";
    for (const auto& r : result.rows) os << fmt17(r.value) << "," << fmt17(r.error) << "," << r.samples << "\n";
    return os.str();
}

} // namespace glab
