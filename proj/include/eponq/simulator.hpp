#pragma once

// Cycle-driven simulation of round-robin EPON polling. With zero propagation
// delay the upstream schedule is a strict alternation of transmission windows
// and guard intervals, so each cycle is processed ONU by ONU:
//
//   GATE ─ window (serve the packets inside the gate) ─ REPORT ─ guard G ─ next ONU
//
// At the REPORT instant the ONU reports l_j packets waiting outside the gate
// and min(l_j, M) of them move inside, to be served in the next cycle.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "eponq/config.hpp"
#include "eponq/errors.hpp"
#include "eponq/rng.hpp"
#include "eponq/stats.hpp"

namespace eponq::sim {

inline constexpr std::uint64_t unlimited_window = std::numeric_limits<std::uint64_t>::max();

struct SimScenario {
    SystemConfig config;
    /// Optional per-ONU window override; empty entries fall back to
    /// config.window_limit (and to gated service when that is empty too).
    std::vector<std::optional<std::uint64_t>> windows;
    std::uint64_t cycles = 100000;  ///< horizon, including warmup
    std::optional<std::uint64_t> warmup;  ///< defaults to 5% of the horizon
    std::uint64_t seed = 1;
    unsigned replications = 1;
    unsigned batches = 50;
    unsigned threads = 0;  ///< 0 = hardware concurrency

    std::uint64_t warmup_cycles() const { return warmup.value_or(cycles / 20); }

    std::uint64_t window_of(std::size_t onu) const {
        std::optional<std::uint64_t> w;
        if (onu < windows.size()) w = windows[onu];
        if (!w) w = config.window_limit;
        return w.value_or(unlimited_window);
    }

    void validate() const {
        if (config.onu_count < 1) throw ConfigError("onu_count", "at least one ONU is required");
        if (config.rates.size() != config.onu_count)
            throw ConfigError("rates", "expected one rate per ONU");
        if (!(config.guard_us > 0.0)) throw ConfigError("guard_us", "must be > 0");
        if (!(cycles > warmup_cycles())) throw ConfigError("cycles", "horizon must exceed the warmup");
        if (replications < 1) throw ConfigError("replications", "must be >= 1");
        if (batches < 2) throw ConfigError("batches", "need at least two batches");
        for (std::size_t i = 0; i < windows.size(); ++i)
            if (windows[i] && *windows[i] < 1) throw ConfigError("windows", "window limits must be >= 1");
    }
};

/// Hooks for tests and tracing; every call is made in simulated-time order.
struct NullObserver {
    void on_departure(unsigned /*onu*/, double /*arrival*/, double /*service_start*/) {}
    void on_window(unsigned /*onu*/, std::uint64_t /*cycle*/, std::uint64_t /*served*/, double /*duration*/) {}
    void on_report(unsigned /*onu*/, std::uint64_t /*reported*/, std::uint64_t /*admitted*/) {}
    void on_cycle(std::uint64_t /*cycle*/, double /*duration*/, double /*window_total*/) {}
};

/// Raw accumulators of one ONU in one replication.
struct OnuTally {
    double wait_sum = 0.0;
    double inside_wait_sum = 0.0;
    std::uint64_t waited = 0;
    std::vector<double> batch_wait_sum;
    std::vector<std::uint64_t> batch_count;
    stats::RunningMoments window;
    std::vector<std::uint64_t> report_hist;
    std::uint64_t reports = 0;
    std::uint64_t tail = 0;
    std::uint64_t arrivals = 0;
    std::uint64_t served = 0;
    std::uint64_t remaining = 0;
};

struct ReplicationTally {
    std::vector<OnuTally> onus;
    stats::RunningMoments cycle;
    std::uint64_t measured_cycles = 0;
    double measured_time = 0.0;
};

struct OnuReport {
    double rate = 0.0;  ///< configured, packets/μs
    std::uint64_t window = unlimited_window;
    double wait_mean = 0.0;     ///< μs
    double wait_ci = 0.0;       ///< 95% half-width, μs
    double busy_mean = 0.0;     ///< mean window duration, μs
    double busy_var = 0.0;      ///< window-duration variance, μs²
    std::vector<std::uint64_t> report_hist;  ///< empirical distribution of l_j
    std::uint64_t reports = 0;
    double tail_prob = 0.0;     ///< Pr{l ≥ M}; 0 under gated service
    double inside_mean = 0.0;   ///< m̄ via Little's law
    double outside_mean = 0.0;  ///< n̄ via Little's law
    std::uint64_t arrivals = 0;
    std::uint64_t served = 0;
    std::uint64_t remaining = 0;

    /// Empirical q_n = Pr{l = n}.
    double report_prob(std::size_t n) const {
        return reports == 0 || n >= report_hist.size() ? 0.0
                                                       : static_cast<double>(report_hist[n]) / static_cast<double>(reports);
    }
};

struct SimReport {
    std::vector<OnuReport> onus;
    double cycle_mean = 0.0;
    double cycle_var = 0.0;
    std::uint64_t measured_cycles = 0;  ///< post-warmup, summed over replications
    std::uint64_t packets_served = 0;
    std::uint64_t packets_remaining = 0;
    unsigned replications = 0;
    bool low_confidence = false;  ///< fewer than 10⁴ post-warmup cycles
    std::string rng_algorithm{CounterRng::algorithm};
};

namespace detail {

struct OnuState {
    std::deque<double> queue;  ///< arrival times; the first `inside` entries are inside the gate
    std::uint64_t inside = 0;
    std::uint64_t window = unlimited_window;
    double rate = 0.0;
    double next_arrival = std::numeric_limits<double>::infinity();
    double last_report = 0.0;
    CounterRng arrivals_rng;
    CounterRng service_rng;
};

}  // namespace detail

enum class StreamPurpose : std::uint64_t { arrivals = 0, service = 1 };

/// One replication. Deterministic in (scenario, replication).
template <class Observer = NullObserver>
ReplicationTally run_replication(const SimScenario& sc, unsigned replication, Observer&& obs = {}) {
    sc.validate();
    const auto& cfg = sc.config;
    const unsigned n = cfg.onu_count;
    const std::uint64_t warmup = sc.warmup_cycles();
    const std::uint64_t measured = sc.cycles - warmup;

    std::vector<detail::OnuState> onus(n);
    ReplicationTally tally;
    tally.onus.resize(n);
    for (unsigned i = 0; i < n; ++i) {
        auto& o = onus[i];
        o.rate = cfg.rates[i];
        o.window = sc.window_of(i);
        o.arrivals_rng = CounterRng(
            CounterRng::derive(sc.seed, replication, i, static_cast<std::uint64_t>(StreamPurpose::arrivals)));
        o.service_rng = CounterRng(
            CounterRng::derive(sc.seed, replication, i, static_cast<std::uint64_t>(StreamPurpose::service)));
        if (o.rate > 0.0) o.next_arrival = o.arrivals_rng.exponential(1.0 / o.rate);
        tally.onus[i].batch_wait_sum.assign(sc.batches, 0.0);
        tally.onus[i].batch_count.assign(sc.batches, 0);
    }

    double t = 0.0;
    double measure_start = 0.0;
    for (std::uint64_t c = 0; c < sc.cycles; ++c) {
        const bool measuring = c >= warmup;
        if (c == warmup) measure_start = t;
        const std::size_t batch = measuring ? static_cast<std::size_t>((c - warmup) * sc.batches / measured) : 0;
        const double cycle_start = t;
        double window_total = 0.0;

        for (unsigned i = 0; i < n; ++i) {
            auto& o = onus[i];
            auto& s = tally.onus[i];
            const double start = t;
            const std::uint64_t k = o.inside;
            for (std::uint64_t j = 0; j < k; ++j) {
                const double arrival = o.queue.front();
                o.queue.pop_front();
                obs.on_departure(i, arrival, t);
                if (measuring) {
                    const double w = t - arrival;
                    s.wait_sum += w;
                    s.inside_wait_sum += t - o.last_report;
                    ++s.waited;
                    s.batch_wait_sum[batch] += w;
                    ++s.batch_count[batch];
                }
                t += cfg.service.sample(o.service_rng);
            }
            s.served += k;
            o.inside = 0;
            const double duration = t - start;
            window_total += duration;
            if (measuring) s.window.add(duration);
            obs.on_window(i, c, k, duration);

            // REPORT: everything queued now is outside the gate.
            while (o.next_arrival <= t) {
                o.queue.push_back(o.next_arrival);
                ++s.arrivals;
                o.next_arrival += o.arrivals_rng.exponential(1.0 / o.rate);
            }
            const std::uint64_t reported = o.queue.size();
            const std::uint64_t admitted = std::min(reported, o.window);
            if (measuring) {
                if (s.report_hist.size() <= reported) s.report_hist.resize(reported + 1, 0);
                ++s.report_hist[reported];
                ++s.reports;
                if (o.window != unlimited_window && reported >= o.window) ++s.tail;
            }
            obs.on_report(i, reported, admitted);
            o.inside = admitted;
            o.last_report = t;
            t += cfg.guard_us;
        }
        obs.on_cycle(c, t - cycle_start, window_total);
        if (measuring) tally.cycle.add(t - cycle_start);
    }
    tally.measured_cycles = measured;
    tally.measured_time = t - measure_start;
    for (unsigned i = 0; i < n; ++i) tally.onus[i].remaining = onus[i].queue.size();
    return tally;
}

/// Merges replication tallies in index order.
inline SimReport merge_replications(const SimScenario& sc, const std::vector<ReplicationTally>& reps) {
    const unsigned n = sc.config.onu_count;
    SimReport out;
    out.replications = static_cast<unsigned>(reps.size());
    out.onus.resize(n);
    stats::RunningMoments cycle;
    double measured_time = 0.0;
    for (const auto& r : reps) {
        cycle.merge(r.cycle);
        out.measured_cycles += r.measured_cycles;
        measured_time += r.measured_time;
    }
    out.cycle_mean = cycle.mean;
    out.cycle_var = cycle.variance();
    out.low_confidence = out.measured_cycles < 10000;

    for (unsigned i = 0; i < n; ++i) {
        OnuReport& o = out.onus[i];
        o.rate = sc.config.rates[i];
        o.window = sc.window_of(i);
        stats::RunningMoments window;
        std::vector<double> batch_means;
        double wait_sum = 0.0;
        double inside_sum = 0.0;
        std::uint64_t waited = 0;
        std::uint64_t tail = 0;
        for (const auto& r : reps) {
            const OnuTally& s = r.onus[i];
            window.merge(s.window);
            wait_sum += s.wait_sum;
            inside_sum += s.inside_wait_sum;
            waited += s.waited;
            tail += s.tail;
            o.reports += s.reports;
            o.arrivals += s.arrivals;
            o.served += s.served;
            o.remaining += s.remaining;
            if (o.report_hist.size() < s.report_hist.size()) o.report_hist.resize(s.report_hist.size(), 0);
            for (std::size_t k = 0; k < s.report_hist.size(); ++k) o.report_hist[k] += s.report_hist[k];
            for (std::size_t b = 0; b < s.batch_count.size(); ++b)
                if (s.batch_count[b] > 0)
                    batch_means.push_back(s.batch_wait_sum[b] / static_cast<double>(s.batch_count[b]));
        }
        o.busy_mean = window.mean;
        o.busy_var = window.variance();
        if (waited > 0) {
            o.wait_mean = wait_sum / static_cast<double>(waited);
            o.wait_ci = stats::batch_means_interval(batch_means).half_width;
            const double throughput = measured_time > 0.0 ? static_cast<double>(waited) / measured_time : 0.0;
            o.inside_mean = throughput * inside_sum / static_cast<double>(waited);
            o.outside_mean = throughput * (wait_sum - inside_sum) / static_cast<double>(waited);
        }
        o.tail_prob = o.reports > 0 ? static_cast<double>(tail) / static_cast<double>(o.reports) : 0.0;
        out.packets_served += o.served;
        out.packets_remaining += o.remaining;
    }
    return out;
}

/// Runs every replication (in parallel when threads allow) and merges them.
inline SimReport run_simulation(const SimScenario& sc) {
    sc.validate();
    std::vector<ReplicationTally> reps(sc.replications);
    unsigned workers = sc.threads ? sc.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, sc.replications);
    if (workers <= 1) {
        for (unsigned r = 0; r < sc.replications; ++r) reps[r] = run_replication(sc, r);
    } else {
        for (unsigned first = 0; first < sc.replications; first += workers) {
            std::vector<std::future<ReplicationTally>> jobs;
            for (unsigned r = first; r < std::min(sc.replications, first + workers); ++r)
                jobs.push_back(std::async(std::launch::async, [&sc, r] { return run_replication(sc, r); }));
            for (unsigned j = 0; j < jobs.size(); ++j) reps[first + j] = jobs[j].get();
        }
    }
    return merge_replications(sc, reps);
}

/// Per-ONU sample variance of window durations.
inline std::vector<double> empirical_busy_variance(const SimReport& report) {
    std::vector<double> v;
    v.reserve(report.onus.size());
    for (const auto& o : report.onus) v.push_back(o.busy_var);
    return v;
}

enum class Discipline { gated, gated_limited };

struct CaptureOptions {
    double onu1_rate = 0.3;      ///< packets/μs (300 packets/ms)
    double x_mean_us = 1.0;      ///< 1000 packets/ms capacity
    double guard_us = 1.512;
    std::uint64_t window = 4;
    std::uint64_t cycles = 200000;
    std::uint64_t seed = 1;
    unsigned replications = 1;
};

struct CaptureResult {
    double rate2 = 0.0;
    OnuReport onu1;
    OnuReport onu2;
};

/// Two ONUs: a disciplined one at its subscribed rate and one at `rate2`.
inline CaptureResult capture_effect_scenario(double rate2, Discipline discipline, const CaptureOptions& opt = {}) {
    SimScenario sc;
    sc.config.onu_count = 2;
    sc.config.guard_us = opt.guard_us;
    sc.config.service = ServiceTimeDist::deterministic(opt.x_mean_us);
    sc.config.subscribed_rate = opt.onu1_rate;
    sc.config.rates = {opt.onu1_rate, rate2};
    if (discipline == Discipline::gated_limited) sc.config.window_limit = opt.window;
    sc.cycles = opt.cycles;
    sc.seed = opt.seed;
    sc.replications = opt.replications;
    const SimReport r = run_simulation(sc);
    return {rate2, r.onus[0], r.onus[1]};
}

}  // namespace eponq::sim
