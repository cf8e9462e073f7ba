#pragma once

// Experiment orchestration behind the command-line tool. Each command
// produces a plain-text report and a CSV table; `run_command` routes them to
// the requested streams and maps errors to exit codes.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eponq/chain.hpp"
#include "eponq/config.hpp"
#include "eponq/config_io.hpp"
#include "eponq/csv.hpp"
#include "eponq/errors.hpp"
#include "eponq/model.hpp"
#include "eponq/optimizer.hpp"
#include "eponq/simulator.hpp"

namespace eponq::cli {

enum class Command { analyze, optimize, simulate, sweep, validate, capture_demo };

inline std::optional<Command> command_from_string(std::string_view s) {
    if (s == "analyze") return Command::analyze;
    if (s == "optimize") return Command::optimize;
    if (s == "simulate") return Command::simulate;
    if (s == "sweep") return Command::sweep;
    if (s == "validate") return Command::validate;
    if (s == "capture-demo") return Command::capture_demo;
    return std::nullopt;
}

/// Sweep range `name:start:stop:step`, inclusive of `stop`.
struct SweepAxis {
    std::string name;
    double start = 0.0;
    double stop = 0.0;
    double step = 1.0;

    std::vector<double> values() const {
        std::vector<double> out;
        if (start > stop) return out;
        const auto count = static_cast<std::uint64_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (std::uint64_t i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
        return out;
    }
};

inline SweepAxis parse_axis(std::string_view text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    if (parts.size() != 4 || parts[0].empty())
        throw ConfigError("axis", "expected name:start:stop:step, got '" + std::string(text) + "'");
    SweepAxis a;
    a.name = parts[0];
    double* slots[] = {&a.start, &a.stop, &a.step};
    for (int i = 0; i < 3; ++i) {
        const std::string& p = parts[static_cast<std::size_t>(i) + 1];
        auto res = std::from_chars(p.data(), p.data() + p.size(), *slots[i]);
        if (res.ec != std::errc{} || res.ptr != p.data() + p.size() || !std::isfinite(*slots[i]))
            throw ConfigError("axis", "'" + p + "' is not a number");
    }
    if (!(a.step > 0.0)) throw ConfigError("axis", "step must be > 0");
    return a;
}

struct ExperimentSpec {
    Command command = Command::analyze;
    std::string config_path;
    std::string output_path;  ///< empty: CSV goes to standard output
    std::optional<SweepAxis> axis;
    std::uint64_t seed = 1;
    unsigned replications = 1;
    std::uint64_t cycles = 100000;
    double tolerance_pct = 5.0;
    bool simulate = false;  ///< sweep: add simulated columns

    void validate() const {
        if (command != Command::capture_demo && config_path.empty())
            throw ConfigError("config", "--config is required for this command");
        if (command == Command::sweep && !axis) throw ConfigError("axis", "sweep needs --axis name:start:stop:step");
        if (axis && !(axis->step > 0.0)) throw ConfigError("axis", "step must be > 0");
        if (replications < 1) throw ConfigError("replications", "must be >= 1");
        if (cycles < 2) throw ConfigError("cycles", "must be >= 2");
        if (!(tolerance_pct > 0.0)) throw ConfigError("tolerance", "must be > 0");
    }
};

struct CommandOutput {
    int status = 0;
    std::string text;
    csv::Table table;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string window_text(double m) { return std::isinf(m) ? "inf" : csv::number(m); }

inline sim::SimScenario scenario(const SystemConfig& c, const ExperimentSpec& spec) {
    sim::SimScenario sc;
    sc.config = c;
    sc.cycles = spec.cycles;
    sc.seed = spec.seed;
    sc.replications = spec.replications;
    return sc;
}

struct OnuAverages {
    double wait = 0.0;
    double wait_ci = 0.0;
    double busy_var = 0.0;
    double tail = 0.0;
    double inside = 0.0;
};

/// Across-ONU means; the CI column is the mean per-ONU half-width.
inline OnuAverages averages(const sim::SimReport& r) {
    OnuAverages a;
    const double n = static_cast<double>(r.onus.size());
    for (const auto& o : r.onus) {
        a.wait += o.wait_mean / n;
        a.wait_ci += o.wait_ci / n;
        a.busy_var += o.busy_var / n;
        a.tail += o.tail_prob / n;
        a.inside += o.inside_mean / n;
    }
    return a;
}

inline CommandOutput analyze(const SystemConfig& c) {
    const auto r = chain::analytic_report(c);
    CommandOutput out;
    std::ostringstream t;
    auto kv = [&](std::string_view k, const std::string& v) { t << k << '=' << v << '\n'; };
    kv("rho_E", csv::number(r.rho_e));
    kv("rho", csv::number(r.rho));
    kv("M", window_text(r.window_limit));
    kv("V_mean_us", csv::number(r.v_mean));
    kv("V_second_us2", csv::number(r.v_second));
    kv("B_mean_us", csv::number(r.busy_mean));
    kv("sigmaB2_us2", csv::number(r.busy_var));
    kv("K_mean", csv::number(r.k_mean));
    kv("K_second", csv::number(r.k_second));
    kv("cycle_mean_us", csv::number(r.cycle_mean));
    kv("sigmaC2_us2", csv::number(r.cycle_var));
    kv("R_us", csv::number(r.residual));
    kv("Y_us", csv::number(r.vacations));
    kv("m_mean", csv::number(r.inside_gate));
    kv("n_mean", csv::number(r.outside_gate));
    kv("N_Q", csv::number(r.queue_len));
    kv("W_us", csv::number(r.wait));
    kv("tail_prob", csv::number(r.tail_prob()));
    kv("chain_iterations", std::to_string(r.chain_iterations));
    out.text = t.str();
    out.table.header = {"rho_E",      "rho",      "M",           "V_mean_us",  "V_second_us2", "B_mean_us",
                        "sigmaB2_us2", "K_mean",  "K_second",    "cycle_mean_us", "sigmaC2_us2", "R_us",
                        "Y_us",        "m_mean",  "n_mean",      "N_Q",        "W_us",         "tail_prob",
                        "chain_iterations"};
    out.table.rows.push_back({csv::number(r.rho_e), csv::number(r.rho), window_text(r.window_limit),
                              csv::number(r.v_mean), csv::number(r.v_second), csv::number(r.busy_mean),
                              csv::number(r.busy_var), csv::number(r.k_mean), csv::number(r.k_second),
                              csv::number(r.cycle_mean), csv::number(r.cycle_var), csv::number(r.residual),
                              csv::number(r.vacations), csv::number(r.inside_gate), csv::number(r.outside_gate),
                              csv::number(r.queue_len), csv::number(r.wait), csv::number(r.tail_prob()),
                              std::to_string(r.chain_iterations)});
    return out;
}

inline std::string fixed2(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    return {buf, res.ptr};
}

inline CommandOutput optimize(const SystemConfig& c) {
    const auto r = sizing::recommend(c);
    CommandOutput out;
    out.warnings = r.warnings;
    const double lambda_hat = units::per_us_to_per_ms(r.stable_rate);
    std::ostringstream t;
    t << "M1=" << r.lower << " M_hat=" << r.approx << " M_star=" << r.optimum << " M2=" << r.upper
      << " lambda_hat=" << fixed2(lambda_hat) << " pkts/ms\n";
    t << "subscribed_rate_pkts_per_ms=" << csv::number(units::per_us_to_per_ms(r.subscribed_rate)) << '\n';
    t << "epsilon=" << csv::number(r.epsilon) << '\n';
    t << "mu_l=" << csv::number(r.queue.mean) << '\n';
    t << "sigma_l2=" << csv::number(r.queue.variance) << '\n';
    t << "saturation_rate_pkts_per_ms=" << csv::number(units::per_us_to_per_ms(r.saturation_rate)) << '\n';
    out.text = t.str();
    out.table.header = {"subscribed_rate_pkts_per_ms", "epsilon", "mu_l", "sigma_l2", "M1", "M_hat", "M_star", "M2",
                        "lambda_hat_pkts_per_ms", "saturation_rate_pkts_per_ms"};
    out.table.rows.push_back({csv::number(units::per_us_to_per_ms(r.subscribed_rate)), csv::number(r.epsilon),
                              csv::number(r.queue.mean), csv::number(r.queue.variance), csv::number(r.lower),
                              csv::number(r.approx), csv::number(r.optimum), csv::number(r.upper),
                              csv::number(lambda_hat), csv::number(units::per_us_to_per_ms(r.saturation_rate))});
    return out;
}

inline CommandOutput simulate(const SystemConfig& c, const ExperimentSpec& spec) {
    const auto sc = scenario(c, spec);
    const auto r = sim::run_simulation(sc);
    CommandOutput out;
    if (r.low_confidence) out.warnings.push_back("fewer than 10^4 post-warmup cycles; statistics are unreliable");
    std::ostringstream t;
    t << "cycle_mean_us=" << csv::number(r.cycle_mean) << '\n';
    t << "cycle_var_us2=" << csv::number(r.cycle_var) << '\n';
    t << "measured_cycles=" << r.measured_cycles << '\n';
    t << "replications=" << r.replications << '\n';
    t << "packets_served=" << r.packets_served << '\n';
    t << "packets_remaining=" << r.packets_remaining << '\n';
    t << "rng=" << r.rng_algorithm << '\n';
    t << "seed=" << spec.seed << '\n';
    out.text = t.str();
    out.table.header = {"onu",       "rate_pkts_per_ms", "M",          "W_sim_us",  "W_sim_ci_us",
                        "busy_mean_us", "sigmaB2_sim",   "tail_prob_sim", "m_mean", "n_mean",
                        "arrivals",  "served",           "remaining"};
    for (std::size_t i = 0; i < r.onus.size(); ++i) {
        const auto& o = r.onus[i];
        out.table.rows.push_back(
            {std::to_string(i), csv::number(units::per_us_to_per_ms(o.rate)),
             o.window == sim::unlimited_window ? "inf" : std::to_string(o.window), csv::number(o.wait_mean),
             csv::number(o.wait_ci), csv::number(o.busy_mean), csv::number(o.busy_var), csv::number(o.tail_prob),
             csv::number(o.inside_mean), csv::number(o.outside_mean), std::to_string(o.arrivals),
             std::to_string(o.served), std::to_string(o.remaining)});
    }
    return out;
}

inline const csv::Row& sweep_header() {
    static const csv::Row h = {"axis_value", "rho_E",          "M",        "W_analytic_us", "W_sim_us",
                               "W_sim_ci_us", "sigmaB2_analytic", "sigmaB2_sim", "tail_prob_sim", "region",
                               "M1",         "M_hat",          "M_star",   "M2",            "lambda_hat_pkts_per_ms"};
    return h;
}

/// Config for one sweep point. `rate` and `subscribed` take packets/ms.
inline SystemConfig sweep_point(const SystemConfig& base, const std::string& axis, double v) {
    SystemConfig c = base;
    if (axis == "rate") {
        c.rates.assign(c.onu_count, units::per_ms_to_per_us(v));
    } else if (axis == "subscribed") {
        c.subscribed_rate = units::per_ms_to_per_us(v);
        c.rates.assign(c.onu_count, c.subscribed_rate);
        c.window_limit = sizing::tw_approx(sizing::queue_moments(c), c.epsilon);
    } else if (axis == "epsilon") {
        if (!(v > 0.0 && v < 1.0)) throw ConfigError("axis", "epsilon values must lie in (0, 1)");
        c.epsilon = v;
        c.window_limit = sizing::tw_approx(sizing::queue_moments(c), c.epsilon);
    } else if (axis == "window") {
        if (v < 1.0 || v != std::floor(v)) throw ConfigError("axis", "window values must be positive integers");
        c.window_limit = static_cast<std::uint64_t>(v);
    } else {
        throw ConfigError("axis", "unknown axis '" + axis + "'; expected rate, subscribed, epsilon or window");
    }
    return c;
}

inline CommandOutput sweep(const SystemConfig& base, const ExperimentSpec& spec) {
    CommandOutput out;
    out.table.header = sweep_header();
    for (double v : spec.axis->values()) {
        const SystemConfig c = sweep_point(base, spec.axis->name, v);
        const double rho_e = c.offered_load();
        const double window = c.window_limit_or_inf();
        const double rate = c.per_onu_rate();

        std::string w_an = "inf";
        std::string var_an = "nan";
        if (rho_e < 1.0) {
            try {
                const auto r = chain::analytic_report(c);
                w_an = csv::number(r.wait);
                var_an = csv::number(r.busy_var);
            } catch (const SaturationError&) {
            }
        }

        std::string w_sim, w_ci, var_sim, tail_sim;
        if (spec.simulate && rho_e < 1.0) {
            const auto a = averages(sim::run_simulation(scenario(c, spec)));
            w_sim = csv::number(a.wait);
            w_ci = csv::number(a.wait_ci);
            var_sim = csv::number(a.busy_var);
            tail_sim = csv::number(a.tail);
        }

        const auto rec = sizing::recommend(c);
        const double lambda_hat = sizing::stable_rate(window, c.onu_count, c.service.mean(), c.guard_us);
        const auto region = sizing::classify_region(rate, c.subscribed_rate, lambda_hat);
        out.table.rows.push_back({csv::number(v), csv::number(rho_e), window_text(window), w_an, w_sim, w_ci, var_an,
                                  var_sim, tail_sim, std::string(sizing::to_string(region)), csv::number(rec.lower),
                                  csv::number(rec.approx), csv::number(rec.optimum), csv::number(rec.upper),
                                  csv::number(units::per_us_to_per_ms(lambda_hat))});
        for (const auto& w : rec.warnings)
            if (out.warnings.empty() || out.warnings.back() != w) out.warnings.push_back(w);
    }
    return out;
}

inline CommandOutput validate(const SystemConfig& c, const ExperimentSpec& spec) {
    const auto an = chain::analytic_report(c);
    const auto rep = sim::run_simulation(scenario(c, spec));
    const auto sim_avg = averages(rep);

    CommandOutput out;
    out.table.header = {"quantity", "analytic", "simulated", "ci_half_width", "rel_error", "tolerance", "pass"};
    const double tol = spec.tolerance_pct / 100.0;
    bool all = true;
    auto add = [&](const std::string& name, double a, double s, double ci, double t) {
        const double rel = a != 0.0 ? std::abs(s - a) / std::abs(a) : std::abs(s - a);
        const bool ok = rel <= t || (std::isfinite(ci) && std::abs(s - a) <= ci);
        all = all && ok;
        out.table.rows.push_back({name, csv::number(a), csv::number(s), std::isfinite(ci) ? csv::number(ci) : "",
                                  csv::number(rel), csv::number(t), ok ? "pass" : "fail"});
    };
    add("W_us", an.wait, sim_avg.wait, sim_avg.wait_ci, tol);
    add("sigmaB2_us2", an.busy_var, sim_avg.busy_var, INFINITY, 2.0 * tol);
    add("cycle_mean_us", an.cycle_mean, rep.cycle_mean, INFINITY, tol);
    add("m_mean", an.inside_gate, sim_avg.inside, INFINITY, tol);

    std::ostringstream t;
    t << "M=" << window_text(an.window_limit) << " rho_E=" << csv::number(an.rho_e)
      << " measured_cycles=" << rep.measured_cycles << '\n';
    for (const auto& row : out.table.rows)
        t << row[0] << ": analytic=" << row[1] << " simulated=" << row[2] << " rel_error=" << row[4] << " -> "
          << row[6] << '\n';
    out.text = t.str();
    if (!all) out.status = static_cast<int>(ErrorCategory::validation);
    return out;
}

inline CommandOutput capture_demo(const std::optional<SystemConfig>& base, const ExperimentSpec& spec) {
    sim::CaptureOptions opt;
    if (base) {
        opt.onu1_rate = base->subscribed_rate;
        opt.x_mean_us = base->service.mean();
        opt.guard_us = base->guard_us;
        if (base->window_limit) opt.window = *base->window_limit;
    }
    opt.cycles = spec.cycles;
    opt.seed = spec.seed;
    opt.replications = spec.replications;
    const SweepAxis axis = spec.axis.value_or(SweepAxis{"rate2", 300.0, 690.0, 30.0});
    if (axis.name != "rate2") throw ConfigError("axis", "capture-demo sweeps rate2 (packets/ms)");

    CommandOutput out;
    out.table.header = {"rate2_pkts_per_ms", "discipline", "W1_us", "W1_ci_us", "W2_us", "W2_ci_us", "remaining2"};
    for (auto discipline : {sim::Discipline::gated, sim::Discipline::gated_limited}) {
        const std::string name = discipline == sim::Discipline::gated ? "gated" : "gated-limited";
        for (double v : axis.values()) {
            const double rate2 = units::per_ms_to_per_us(v);
            // A gated cycle grows without bound once the link is overloaded.
            if (discipline == sim::Discipline::gated && (opt.onu1_rate + rate2) * opt.x_mean_us >= 1.0) {
                out.table.rows.push_back({csv::number(v), name, "inf", "", "inf", "", ""});
                continue;
            }
            const auto r = sim::capture_effect_scenario(rate2, discipline, opt);
            out.table.rows.push_back({csv::number(v), name, csv::number(r.onu1.wait_mean), csv::number(r.onu1.wait_ci),
                                      csv::number(r.onu2.wait_mean), csv::number(r.onu2.wait_ci),
                                      std::to_string(r.onu2.remaining)});
        }
    }
    return out;
}

}  // namespace detail

inline io::ParsedConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return io::parse_config(buf.str());
}

/// Runs one command on an already-parsed configuration.
inline CommandOutput execute(const ExperimentSpec& spec, const std::optional<SystemConfig>& config) {
    spec.validate();
    auto need = [&]() -> const SystemConfig& {
        if (!config) throw ConfigError("config", "--config is required for this command");
        return *config;
    };
    switch (spec.command) {
        case Command::analyze: return detail::analyze(need());
        case Command::optimize: return detail::optimize(need());
        case Command::simulate: return detail::simulate(need(), spec);
        case Command::sweep: return detail::sweep(need(), spec);
        case Command::validate: return detail::validate(need(), spec);
        default: return detail::capture_demo(config, spec);
    }
}

inline std::string_view remediation_hint(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return "fix the named field in the configuration or command line";
        case ErrorCategory::validation: return "simulation and analysis disagree beyond the tolerance; "
                                               "try more --cycles or --replications, or a larger --tolerance";
        case ErrorCategory::numerical: return "the solver did not converge; a smaller window or lower load may help";
        case ErrorCategory::saturation: return "lower the arrival rate or enlarge window_limit_pkts";
        default: return "the model's assumptions do not hold for this configuration";
    }
}

/// Loads the config, executes, writes the text report to `out` and the CSV to
/// spec.output_path (or `out` when no path is given). Returns the exit code.
inline int run_command(const ExperimentSpec& spec, std::ostream& out, std::ostream& err) {
    try {
        std::optional<SystemConfig> config;
        if (!spec.config_path.empty()) {
            auto parsed = load_config(spec.config_path);
            for (const auto& w : parsed.warnings) err << "warning: " << w << '\n';
            config = std::move(parsed.config);
        }
        const CommandOutput result = execute(spec, config);
        for (const auto& w : result.warnings) err << "warning: " << w << '\n';
        out << result.text;
        if (spec.output_path.empty()) {
            if (!result.text.empty()) out << '\n';
            result.table.write(out);
        } else {
            std::ofstream file(spec.output_path, std::ios::binary);
            if (!file) throw ConfigError("output", "cannot write '" + spec.output_path + "'");
            result.table.write(file);
        }
        if (result.status != 0) err << "validation failed; hint: " << remediation_hint(ErrorCategory::validation) << '\n';
        return result.status;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n' << "hint: " << remediation_hint(e.category()) << '\n';
        return static_cast<int>(e.category());
    }
}

}  // namespace eponq::cli
