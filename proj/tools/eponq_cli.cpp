// eponq: analysis, window sizing and simulation of gated-limited EPON polling.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "eponq/commands.hpp"

int main(int argc, char** argv) {
    using eponq::cli::Command;

    CLI::App app{"Gated-limited EPON queueing analysis, window sizing and simulation"};
    app.require_subcommand(1);

    eponq::cli::ExperimentSpec spec;
    std::string axis;

    struct Entry {
        const char* name;
        Command command;
        const char* help;
    };
    const Entry entries[] = {
        {"analyze", Command::analyze, "Analytic moments and mean waiting time"},
        {"optimize", Command::optimize, "Transmission-window sizing for the subscribed rate"},
        {"simulate", Command::simulate, "Discrete-event simulation of the polling cycle"},
        {"sweep", Command::sweep, "Analytic (and optionally simulated) sweep over one axis"},
        {"validate", Command::validate, "Compare analysis with simulation"},
        {"capture-demo", Command::capture_demo, "Two-ONU capture-effect demonstration"},
    };

    for (const auto& e : entries) {
        auto* sub = app.add_subcommand(e.name, e.help);
        sub->add_option("--config", spec.config_path, "Scenario JSON document");
        sub->add_option("--output", spec.output_path, "CSV destination (default: standard output)");
        if (e.command == Command::sweep || e.command == Command::capture_demo)
            sub->add_option("--axis", axis, "name:start:stop:step (sweep: rate, subscribed, epsilon, window; "
                                            "capture-demo: rate2), rates in packets/ms");
        if (e.command == Command::simulate || e.command == Command::sweep || e.command == Command::validate ||
            e.command == Command::capture_demo) {
            sub->add_option("--seed", spec.seed, "Master RNG seed");
            sub->add_option("--replications", spec.replications, "Independent replications");
            sub->add_option("--cycles", spec.cycles, "Polling cycles per replication, warmup included");
        }
        if (e.command == Command::sweep) sub->add_flag("--simulate", spec.simulate, "Add simulated columns");
        if (e.command == Command::validate)
            sub->add_option("--tolerance", spec.tolerance_pct, "Relative tolerance in percent");
        sub->callback([&spec, cmd = e.command] { spec.command = cmd; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(eponq::ErrorCategory::config);
    }

    if (!axis.empty()) {
        try {
            spec.axis = eponq::cli::parse_axis(axis);
        } catch (const eponq::Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return static_cast<int>(e.category());
        }
    }
    return eponq::cli::run_command(spec, std::cout, std::cerr);
}
