#include "glab/errors.hpp"
#include "glab/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kParseError = 2, kSolverError = 3 };

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw glab::ParseError("--values: cannot parse '" + item + "'");
        }
        if (used != item.size()) throw glab::ParseError("--values: cannot parse '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw glab::ParseError("--values: empty list");
    return out;
}

std::filesystem::path output_dir(const glab::Scenario& s, const std::string& flag) {
    if (!flag.empty()) return flag;
    if (!s.output.empty()) return s.output;
    return std::filesystem::path("glab-out") / s.name;
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const glab::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kParseError;
    } catch (const glab::PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kParseError;
    } catch (const glab::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolverError;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolverError;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Averaged Green matrix laboratory for divergence-form parabolic systems"};
    app.require_subcommand(1);
    int jobs = 1;
    std::string out;
    app.add_option("--jobs,-j", jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out,-o", out, "output directory");

    std::string run_file;
    auto* run = app.add_subcommand("run", "run the checks of a scenario");
    run->add_option("scenario", run_file, "scenario JSON file")->required();
    run->add_option("--jobs,-j", jobs, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out,-o", out, "output directory");

    std::string sweep_file, axis, values;
    auto* sweep = app.add_subcommand("sweep", "repeat a scenario along one refinement axis");
    sweep->add_option("scenario", sweep_file, "scenario JSON file")->required();
    sweep->add_option("--axis", axis, "h, tau or rho")->required();
    sweep->add_option("--values", values, "comma separated values")->required();
    sweep->add_option("--jobs,-j", jobs, "worker threads")->check(CLI::PositiveNumber);
    sweep->add_option("--out,-o", out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kParseError;
    }

    const glab::RunOptions options{jobs};
    if (*run) {
        return guarded([&] {
            const glab::Scenario s = glab::load_scenario(run_file);
            const glab::VerificationReport report = glab::run_scenario(s, options);
            const auto dir = output_dir(s, out);
            glab::write_report(report, dir);
            std::cout << glab::report_summary(report);
            std::cout << "report written to " << (dir / "report.json").string() << "\n";
            for (const auto& r : report.records)
                if (!r.passed()) std::cerr << "check failed: " << r.name << " [" << r.anchor << "]: " << r.message << "\n";
            return report.all_passed() ? kOk : kCheckFailed;
        });
    }
    return guarded([&] {
        const glab::Scenario s = glab::load_scenario(sweep_file);
        const glab::SweepAxis ax = glab::sweep_axis_from_string(axis);
        const glab::SweepResult result = glab::run_sweep(s, ax, parse_values(values), options);
        const auto dir = output_dir(s, out);
        std::filesystem::create_directories(dir);
        const std::string csv = glab::sweep_csv(result);
        std::ofstream(dir / ("sweep_" + glab::to_string(ax) + ".csv"), std::ios::binary) << csv;
        std::cout << csv;
        return kOk;
    });
}
