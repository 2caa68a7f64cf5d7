// Acceptance run: one PASS/FAIL line per criterion; exit 1 if any fails.

#include "glab/errors.hpp"
#include "glab/green.hpp"
#include "glab/kernel.hpp"
#include "glab/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace glab;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = GLAB_SCENARIO_DIR;

struct Verdict {
    bool pass = true;
    std::ostringstream detail;
    std::vector<std::string> problems;

    void require(bool ok, const std::string& why) {
        if (!ok) {
            pass = false;
            problems.push_back(why);
        }
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

Scenario load(const std::string& name) { return load_scenario(kScenarios / (name + ".json")); }

Scenario only(Scenario sc, const std::set<std::string>& checks) {
    std::vector<CheckSpec> kept;
    for (const auto& c : sc.checks)
        if (checks.count(c.name)) kept.push_back(c);
    sc.checks = kept;
    return sc;
}

std::vector<const CheckRecord*> records(const VerificationReport& r, const std::string& prefix) {
    std::vector<const CheckRecord*> out;
    for (const auto& rec : r.records)
        if (rec.name.compare(0, prefix.size(), prefix) == 0) out.push_back(&rec);
    return out;
}

const std::vector<std::string> kBoundScenarios{
    "heat-1d-bounds", "constant-1d",        "t-only-1d",  "oscillatory-1d",
    "checkerboard-1d", "almost-diagonal-1d", "rotating-1d"};

std::vector<std::string> identity_scenarios() {
    std::vector<std::string> all = kBoundScenarios;
    for (const char* s : {"heat-2d", "constant-2d", "t-only-2d", "oscillatory-2d", "checkerboard-2d",
                          "almost-diagonal-2d", "rotating-2d", "rotating-1d-dirichlet", "heat-1d-core"})
        all.emplace_back(s);
    return all;
}

std::map<std::string, VerificationReport> g_reports;

const VerificationReport& report_for(const std::string& name) {
    auto it = g_reports.find(name);
    if (it == g_reports.end()) it = g_reports.emplace(name, run_scenario(load(name))).first;
    return it->second;
}

// Runs `check` on every identity scenario and folds the records it names.
Verdict exact_identity(const std::string& check, const std::string& key, double limit,
                       const std::function<bool(const Scenario&)>& applies = {}) {
    Verdict v;
    double w = 0.0;
    int covered = 0;
    for (const auto& name : identity_scenarios()) {
        const Scenario sc = load(name);
        if (applies && !applies(sc)) continue;
        const auto recs = records(report_for(name), check);
        v.require(!recs.empty(), name + ": no " + check + " record");
        for (const auto* r : recs) {
            const double value = r->fitted.at(key);
            w = std::max(w, value);
            v.require(r->status == Status::pass && value <= limit, name + ": " + key + " " + fmt(value));
        }
        ++covered;
    }
    v.detail << "max " << key << " " << fmt(w) << " over " << covered << " scenarios";
    return v;
}

Verdict criterion_kernel() {
    Verdict v;
    const Scenario sc = only(load("heat-1d-core"), {"kernel"});
    const double h = 1.0 / sc.cells.at(0);
    v.require(h == 1.0 / 128 && sc.tau == 0.5 * h * h, "reference mesh is not h = 1/128, tau = h^2/2");
    const auto start = std::chrono::steady_clock::now();
    const auto rep = run_scenario(sc, {1});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto recs = records(rep, "kernel");
    v.require(recs.size() == 1, "missing kernel record");
    if (recs.size() != 1) return v;
    const double err = recs[0]->fitted.at("sup_relative_error");
    const double dt = recs[0]->fitted.at("t_minus_s");
    v.require(std::abs(dt - 0.05) <= sc.tau, "t - s is not 0.05");
    v.require(err <= 0.02 && recs[0]->status == Status::pass, "sup-relative error above 2%");
    v.require(secs < 60.0, "runtime above 60 s");
    const double one[1] = {1.0};
    const double spot = heat_kernel(0.25, one);
    v.require(std::abs(spot - 0.20755) < 5e-6, "spot value");
    v.detail << "sup-rel error " << fmt(err) << " at t-s " << fmt(dt) << " in " << fmt(secs)
             << " s; Phi(0.25,1) = " << fmt(spot);
    return v;
}

Verdict criterion_duality() {
    Verdict v;
    double w = 0.0;
    bool nonsymmetric = false;
    std::size_t fewest = ~std::size_t{0};
    for (const auto& name : identity_scenarios()) {
        const auto recs = records(report_for(name), "duality");
        v.require(recs.size() == 1, name + ": no duality record");
        for (const auto* r : recs) {
            const double res = r->fitted.at("max_residual");
            w = std::max(w, res);
            fewest = std::min(fewest, r->samples);
            v.require(r->samples >= 20, name + ": fewer than 20 cases");
            v.require(r->status == Status::pass && res <= 1e-10, name + ": residual " + fmt(res));
        }
        const Scenario sc = load(name);
        if (sc.preset == "rotating" && sc.N == 2) nonsymmetric = true;
    }
    v.require(nonsymmetric, "no nonsymmetric 2x2 system covered");
    v.detail << "max residual " << fmt(w) << ", >= " << fewest << " cases per scenario, rotating 2x2 included";
    return v;
}

Verdict criterion_gaussian() {
    Verdict v;
    for (const char* name : {"heat-1d-bounds", "checkerboard-1d", "rotating-1d"}) {
        const auto recs = records(report_for(name), "gaussian");
        v.require(recs.size() == 1, std::string(name) + ": no gaussian record");
        for (const auto* r : recs) {
            const double kf = r->fitted.at("kappa_fit"), kr = r->fitted.at("kappa_required");
            const double c = r->fitted.at("constant_at_required");
            v.require(kf >= kr && c <= 10.0, std::string(name) + ": kappa_fit " + fmt(kf));
            v.detail << name << " kappa_fit " << fmt(kf) << " >= " << fmt(kr) << " (C " << fmt(c) << "); ";
        }
    }
    return v;
}

Verdict criterion_gaffney() {
    Verdict v;
    double worst_ratio = 0.0;
    int count = 0, shrink_checked = 0, raw_decreased = 0;
    for (const auto& name : kBoundScenarios) {
        const auto recs = records(report_for(name), "gaffney");
        std::set<std::pair<double, double>> combos;
        for (const auto* r : recs) {
            combos.insert({r->fitted.at("distance"), r->fitted.at("t_minus_s")});
            const double rb = r->fitted.at("ratio_over_bound");
            worst_ratio = std::max(worst_ratio, rb);
            v.require(r->status == Status::pass && rb <= 1.05, name + " " + r->name + ": " + fmt(rb));
            ++count;
        }
        v.require(recs.size() == 6 && combos.size() == 6, name + ": expected d in {0.25, 0.5, 1} x t-s in {0.1, 0.5}");

        // one tau refinement: the excess over the bound must not grow
        Scenario fine = only(load(name), {"gaffney"});
        fine.tau *= 0.5;
        const auto refined = run_scenario(fine);
        const auto frecs = records(refined, "gaffney");
        v.require(frecs.size() == recs.size(), name + ": refined run lost records");
        for (std::size_t i = 0; i < std::min(frecs.size(), recs.size()); ++i) {
            const double coarse = std::max(1.0, recs[i]->fitted.at("ratio_over_bound"));
            const double finer = std::max(1.0, frecs[i]->fitted.at("ratio_over_bound"));
            v.require(finer <= coarse, name + " " + recs[i]->name + ": slack grows under refinement");
            if (frecs[i]->fitted.at("ratio_over_bound") <= recs[i]->fitted.at("ratio_over_bound"))
                ++raw_decreased;
            ++shrink_checked;
        }
    }
    v.detail << count << " (preset, d, t-s) cases, max ratio/bound " << fmt(worst_ratio) << "; "
             << shrink_checked << " cases re-run at tau/2 without slack growth (raw ratio/bound down in "
             << raw_decreased << ")";
    return v;
}

Verdict criterion_davies() {
    Verdict v;
    double w = 0.0;
    int count = 0;
    for (const auto& name : kBoundScenarios) {
        const auto recs = records(report_for(name), "davies");
        std::set<double> gammas;
        for (const auto* r : recs) {
            const double g = r->fitted.at("gamma"), ratio = r->fitted.at("max_ratio");
            gammas.insert(g);
            w = std::max(w, ratio);
            v.require(r->status == Status::pass, name + " " + r->name + " fails");
            if (g == 0.0)
                v.require(r->fitted.at("monotonicity_violations") == 0.0, name + ": L2 decay violated");
            ++count;
        }
        v.require(gammas == std::set<double>{0.0, 0.5, 1.0, 2.0}, name + ": gamma set incomplete");
    }
    v.detail << count << " (preset, gamma) cases, max I(t)/bound " << fmt(w)
             << ", zero monotonicity violations at gamma = 0";
    return v;
}

Verdict criterion_decay() {
    Verdict v;
    const std::vector<std::pair<std::string, std::string>> wanted{
        {"heat-1d-decay", "pointwise_decay"}, {"heat-1d-decay", "weak_lp_value"},
        {"heat-1d-decay", "weak_lp_gradient"}, {"heat-2d-decay", "pointwise_decay"},
        {"heat-2d-weak-lp", "weak_lp_value"}, {"heat-2d-weak-lp", "weak_lp_gradient"}};
    for (const auto& [name, check] : wanted) {
        const auto recs = records(report_for(name), check);
        v.require(recs.size() == 1, name + ": no " + check + " record");
        for (const auto* r : recs) {
            const double e = r->fitted.at("exponent");
            v.require(r->status == Status::pass && e <= r->tolerance, name + " " + check + ": " + fmt(e));
            v.detail << name << " " << check << " " << fmt(e) << " <= " << fmt(r->tolerance) << "; ";
        }
    }
    return v;
}

Verdict criterion_ph() {
    Verdict v;
    for (const char* name : {"ph-heat-1d", "ph-constant-1d", "ph-t-only-1d", "ph-almost-diagonal-1d",
                             "ph-rotating-1d"}) {
        const Scenario sc = only(load(name), {"ph"});
        v.require(!sc.coefficients().depends_on_x(), std::string(name) + " depends on x");
        const auto rep = run_scenario(sc);
        const auto recs = records(rep, "ph_energy_decay");
        v.require(recs.size() == 1, std::string(name) + ": no record");
        for (const auto* r : recs) {
            const double e = r->fitted.at("exponent");
            v.require(r->samples >= 10, std::string(name) + ": fewer than 10 solutions");
            v.require(r->status == Status::pass && e >= sc.n + 1.8, std::string(name) + ": exponent " + fmt(e));
            v.detail << sc.preset << " " << fmt(e) << "; ";
        }
    }
    return v;
}

Verdict criterion_oracle() {
    Verdict v;
    int checked = 0, skipped = 0;
    double worst_oracle = 0.0, worst_adjoint = 0.0;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(kScenarios))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        const Scenario sc = load_scenario(file);
        const Mesh mesh = sc.mesh();
        const ThetaStepper stepper(mesh, sc.spec(), sc.theta);
        const Eigen::Index S = stepper.slice_size();
        const int steps = static_cast<int>(std::min<Eigen::Index>(50, kDenseOracleCap / S));
        const std::string name = file.stem().string();
        if (steps >= 1) {
            std::vector<Slice> f;
            for (int j = 0; j < steps; ++j) f.push_back(random_smooth_slice(mesh, sc.N, 2, 500 + j));
            const Slice g = random_smooth_slice(mesh, sc.N, 3, 499);
            const auto rec = check_oracle_equivalence(stepper, g, slice_source(f, 0), 0, steps);
            const double e = rec.fitted.at("relative_error");
            worst_oracle = std::max(worst_oracle, e);
            v.require(rec.status == Status::pass && e <= 1e-9, name + ": oracle " + fmt(e));
            ++checked;
        } else {
            ++skipped;
        }
        const Slice a = random_smooth_slice(mesh, sc.N, 3, 11), b = random_smooth_slice(mesh, sc.N, 3, 12);
        const auto adj = check_adjointness(stepper, a, b, 0, 20);
        const double ea = adj.fitted.at("relative_error");
        worst_adjoint = std::max(worst_adjoint, ea);
        v.require(adj.status == Status::pass && ea <= 1e-12, name + ": adjointness " + fmt(ea));
    }
    v.detail << "oracle on " << checked << " scenarios (" << skipped << " above the cap), max rel "
             << fmt(worst_oracle) << "; adjointness on " << files.size() << ", max rel " << fmt(worst_adjoint);
    return v;
}

Verdict criterion_initial_trace() {
    Verdict v;
    const Scenario sc = load("heat-1d-core");
    const auto recs = records(report_for("heat-1d-core"), "initial_trace");
    v.require(recs.size() == 1, "no initial_trace record");
    for (const auto* r : recs) {
        const double e = r->fitted.at("final_error"), lim = r->fitted.at("limit");
        const double dt = r->fitted.at("final_t_minus_s");
        v.require(std::abs(dt - 4.0 * sc.tau) <= 1e-12 * sc.tau, "final offset is not 4 tau");
        v.require(r->fitted.at("monotone") == 1.0, "not monotone");
        v.require(e <= lim && r->status == Status::pass, "final error above limit");
        v.detail << "error " << fmt(e) << " <= " << fmt(lim) << " at t-s = 4 tau, monotone";
    }
    return v;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "heat-kernel oracle", criterion_kernel},
        {2, "semigroup identity",
         [] { return exact_identity("semigroup", "relative_error", 1e-12); }},
        {3, "averaged duality", criterion_duality},
        {4, "normalization",
         [] {
             return exact_identity("normalization", "max_deviation", 1e-12,
                                   [](const Scenario& s) { return s.mode == BoundaryMode::periodic; });
         }},
        {5, "causality and zero extension",
         [] {
             Verdict v = exact_identity("causality", "max_before_cylinder", 0.0);
             for (const auto& name : identity_scenarios())
                 for (const auto* r : records(report_for(name), "causality"))
                     v.require(r->fitted.at("max_extrapolated_before_pole") == 0.0 &&
                                   r->fitted.at("max_after_transpose_cylinder") == 0.0,
                               name + ": nonzero extension");
             return v;
         }},
        {6, "Gaussian upper bound", criterion_gaussian},
        {7, "Gaffney off-diagonal decay", criterion_gaffney},
        {8, "Davies weighted growth", criterion_davies},
        {9, "decay exponents", criterion_decay},
        {10, "interior energy decay", criterion_ph},
        {11, "oracle equivalence and adjointness", criterion_oracle},
        {12, "initial trace", criterion_initial_trace},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.require(false, std::string("exception: ") + e.what());
        }
        if (!v.pass) ++failures;
        std::cout << "criterion " << std::setw(2) << c.id << ": " << (v.pass ? "PASS" : "FAIL") << "  "
                  << c.title << " -- " << v.detail.str();
        for (const auto& p : v.problems) std::cout << " [" << p << "]";
        std::cout << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
