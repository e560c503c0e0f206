#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "condrot/condrot.hpp"

namespace {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_config = 2,
    exit_simulation = 3,
    exit_fit = 4,
};

struct CommonArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string points;
    std::string curve;
};

void apply_points(condrot::Scenario& s, const std::string& points) {
    if (points.empty()) {
        return;
    }
    if (s.kind == condrot::ScenarioKind::delay_scan) {
        s.delays = condrot::parse_quantity_list(points, condrot::Quantity::time, "--points");
        return;
    }
    bool plain_count = points.find_first_not_of("0123456789") == std::string::npos;
    if (plain_count) {
        auto n = std::stoul(points);
        if (n == 0) {
            throw condrot::ConfigError("--points must be positive");
        }
        s.thetas = condrot::default_thetas(n);
    } else {
        s.thetas = condrot::parse_quantity_list(points, condrot::Quantity::angle, "--points");
    }
}

void emit(const condrot::ScenarioOutput& out, const std::string& dir) {
    if (dir.empty()) {
        std::cout << out.report;
    } else {
        condrot::write_outputs(out, dir);
    }
}

/// Maps library exceptions onto the documented exit codes.
template<class Fn_>
int guarded(Fn_ fn) {
    try {
        return fn();
    } catch (const condrot::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const condrot::FitError& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return exit_fit;
    } catch (const condrot::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_fit;
    } catch (const condrot::SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << '\n';
        return exit_simulation;
    } catch (const condrot::InputError& e) {
        std::cerr << "simulation error: " << e.what() << '\n';
        return exit_simulation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
}

condrot::Scenario load(const CommonArgs& args, std::optional<condrot::ScenarioKind> kind) {
    auto s = condrot::load_scenario(args.config, kind);
    if (args.seed) {
        s.config.seed = *args.seed;
    }
    return s;
}

}

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo and analysis tools for triggered polarization rotation on photon pairs"};
    app.require_subcommand(0, 1);
    app.set_version_flag("--version", std::string("condrot config schema ") + condrot::config_schema_version);

    CommonArgs args;
    int status = exit_ok;

    auto* simulate = app.add_subcommand("simulate", "Run a polarizer or delay scan");
    simulate->require_subcommand(1);
    auto add_scan = [&](const char* name, condrot::ScenarioKind kind, const char* help) {
        auto* sub = simulate->add_subcommand(name, help);
        sub->add_option("--config", args.config, "Scenario/config file")->required();
        sub->add_option("--out", args.out, "Output directory")->required();
        sub->add_option("--seed", args.seed, "Override the master seed");
        sub->add_option("--points", args.points, "Angle count or comma list (scan angles or delays, with units)");
        sub->callback([&, kind]() {
            status = guarded([&]() {
                auto s = load(args, kind);
                apply_points(s, args.points);
                emit(condrot::run_scenario(s), args.out);
                return int(exit_ok);
            });
        });
    };
    add_scan("polarizer-scan", condrot::ScenarioKind::polarizer_scan, "Singles and coincidences versus polarizer angle");
    add_scan("delay-scan", condrot::ScenarioKind::delay_scan, "Singles versus electronic trigger delay");

    auto* analyze = app.add_subcommand("analyze", "Analyze existing curve files");
    analyze->require_subcommand(1);
    auto* fit = analyze->add_subcommand("fit", "Harmonic visibility fit of a curve file");
    fit->add_option("--curve", args.curve, "Curve CSV")->required();
    fit->add_option("--out", args.out, "Report file (stdout if omitted)");
    fit->callback([&]() {
        status = guarded([&]() {
            auto curve = condrot::load_curve(args.curve);
            auto report = condrot::format_fit_report(curve);
            if (args.out.empty()) {
                std::cout << report;
            } else {
                std::ofstream f(args.out, std::ios::binary | std::ios::trunc);
                if (!f) {
                    throw std::runtime_error("cannot write '" + args.out + "'");
                }
                f << report;
            }
            return int(exit_ok);
        });
    });

    auto* calibrate = app.add_subcommand("calibrate", "Trigger-efficiency estimate from visibility and from the Klyshko ratio");
    calibrate->add_option("--config", args.config, "Scenario/config file")->required();
    calibrate->add_option("--curve", args.curve, "Use this singles curve instead of simulating one");
    calibrate->add_option("--out", args.out, "Output directory (report to stdout if omitted)");
    calibrate->add_option("--seed", args.seed, "Override the master seed");
    calibrate->add_option("--points", args.points, "Angle count or comma list");
    calibrate->callback([&]() {
        status = guarded([&]() {
            auto s = load(args, condrot::ScenarioKind::calibrate);
            apply_points(s, args.points);
            std::optional<condrot::CurveFile> curve;
            if (!args.curve.empty()) {
                curve = condrot::load_curve(args.curve);
            }
            emit(condrot::run_calibrate(s, curve ? &*curve : nullptr), args.out);
            return int(exit_ok);
        });
    });

    auto* run = app.add_subcommand("run", "Run the scenario named by the file's 'scenario' key");
    run->add_option("--config", args.config, "Scenario file")->required();
    run->add_option("--out", args.out, "Output directory (report to stdout if omitted)");
    run->add_option("--seed", args.seed, "Override the master seed");
    run->callback([&]() {
        status = guarded([&]() {
            auto s = load(args, std::nullopt);
            auto out = condrot::run_scenario(s);
            emit(out, args.out);
            return int(out.oracle_passed ? exit_ok : exit_fit);
        });
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }
    if (app.get_subcommands().empty()) {
        std::cout << app.help();
        return exit_usage;
    }
    return status;
}
