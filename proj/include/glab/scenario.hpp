#pragma once

#include "glab/verify.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace glab {

/// A pole given in physical coordinates; snapped to the nearest grid point.
struct PoleSpec {
    double t = 0.0;
    std::vector<double> x;
};

/// One requested check with its parameters (validated against the check's
/// known keys at parse time).
struct CheckSpec {
    std::string name;
    std::map<std::string, std::vector<double>> params;

    bool has(const std::string& key) const { return params.count(key) != 0; }
    double scalar(const std::string& key, double fallback) const;
    std::vector<double> list(const std::string& key, std::vector<double> fallback) const;
};

/// Parsed, validated scenario.
struct Scenario {
    std::string name = "scenario";
    std::string preset;
    std::filesystem::path table;
    std::map<std::string, double> params;
    int n = 1;
    int N = 1;
    std::optional<double> lambda, Lambda_bound, R_c;
    double theta = 1.0;

    std::vector<int> cells;
    double tau = 0.0;
    double t0 = 0.0;
    BoundaryMode mode = BoundaryMode::periodic;
    std::vector<double> box_lo, box_hi;

    std::vector<PoleSpec> poles;
    std::vector<double> rho_list;
    double sigma = 0.0;

    std::vector<CheckSpec> checks;
    std::filesystem::path output;

    Domain domain() const;
    Mesh mesh() const;
    CoefficientField coefficients() const;
    OperatorSpec spec() const { return OperatorSpec{coefficients(), domain(), false}; }
    GridPoint pole(const Mesh& mesh, std::size_t i) const;
};

/// Names accepted in the `checks` list.
const std::vector<std::string>& check_names();

/// Strict parsing: unknown keys, unknown check names and out-of-contract
/// values raise ParseError. Relative table paths resolve against `base_dir`.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

struct RunOptions {
    int jobs = 1;
};

/// Runs every requested check in order.
VerificationReport run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Deterministic structured report (JSON text).
std::string report_json(const VerificationReport& report);
std::string report_summary(const VerificationReport& report);
std::string record_csv(const CheckRecord& record);
/// Writes report.json, summary.txt and one CSV per record with rows.
void write_report(const VerificationReport& report, const std::filesystem::path& dir);

enum class SweepAxis { h, tau, rho };
SweepAxis sweep_axis_from_string(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepRow {
    double value = 0.0;
    double error = 0.0;
    std::size_t samples = 0;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::h;
    std::string reference;  ///< "analytic" or "finest"
    std::vector<SweepRow> rows;
    std::optional<double> observed_order;
};

/// Repeats the scenario's first pole column along one axis and measures the
/// slice error at the largest requested time. Heat-type presets compare
/// against the analytic kernel; others against the finest run.
SweepResult run_sweep(const Scenario& scenario, SweepAxis axis, const std::vector<double>& values,
                      const RunOptions& options = {});
std::string sweep_csv(const SweepResult& result);

} // namespace glab
