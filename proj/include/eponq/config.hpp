#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "eponq/errors.hpp"
#include "eponq/service_time.hpp"

namespace eponq {

// Internal units are microseconds and packets/μs. The user-facing unit for
// rates is packets/ms.
namespace units {
inline constexpr double us_per_ms = 1000.0;

constexpr double per_ms_to_per_us(double pkts_per_ms) noexcept { return pkts_per_ms / us_per_ms; }
constexpr double per_us_to_per_ms(double pkts_per_us) noexcept { return pkts_per_us * us_per_ms; }
}  // namespace units

inline constexpr double default_epsilon = 0.05;

/// One EPON scenario. `window_limit` empty means gated service (no cap).
struct SystemConfig {
    std::uint32_t onu_count = 0;
    double guard_us = 0.0;
    ServiceTimeDist service = ServiceTimeDist::deterministic(1.0);
    /// Per-ONU subscribed (SLA) rate, packets/μs.
    double subscribed_rate = 0.0;
    /// Actual per-ONU arrival rates, packets/μs; size == onu_count.
    std::vector<double> rates;
    std::optional<std::uint64_t> window_limit;
    double epsilon = default_epsilon;

    bool operator==(const SystemConfig&) const = default;

    double total_rate() const { return std::accumulate(rates.begin(), rates.end(), 0.0); }
    /// ρ_E = Σλ_i·X̄.
    double offered_load() const { return total_rate() * service.mean(); }

    bool homogeneous() const {
        return std::all_of(rates.begin(), rates.end(), [&](double r) { return r == rates.front(); });
    }

    /// Per-ONU rate of a homogeneous config.
    double per_onu_rate() const {
        if (rates.empty() || !homogeneous())
            throw ConfigError("rates", "the analytic model requires statistically identical ONUs");
        return rates.front();
    }

    double window_limit_or_inf() const {
        return window_limit ? static_cast<double>(*window_limit) : std::numeric_limits<double>::infinity();
    }

    void validate() const {
        if (onu_count < 1) throw ConfigError("onu_count", "must be at least 1");
        if (!(guard_us > 0.0) || !std::isfinite(guard_us)) throw ConfigError("guard_us", "must be > 0");
        if (rates.size() != onu_count)
            throw ConfigError("rates", "expected " + std::to_string(onu_count) + " per-ONU rates, got " +
                                           std::to_string(rates.size()));
        for (double r : rates)
            if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("rates", "rates must be >= 0");
        if (!(subscribed_rate >= 0.0) || !std::isfinite(subscribed_rate))
            throw ConfigError("subscribed_rate", "must be >= 0");
        if (window_limit && *window_limit < 1) throw ConfigError("window_limit", "must be >= 1");
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon", "must lie in (0, 1)");
        const double load = offered_load();
        if (!(load < 1.0))
            throw ConfigError("rates", "offered load rho_E = " + std::to_string(load) + " must be < 1");
    }

    /// Homogeneous config with every ONU at its subscribed rate.
    static SystemConfig homogeneous_at(std::uint32_t n, double guard_us, ServiceTimeDist service, double rate,
                                       std::optional<std::uint64_t> window_limit = std::nullopt,
                                       double epsilon = default_epsilon) {
        SystemConfig c;
        c.onu_count = n;
        c.guard_us = guard_us;
        c.service = std::move(service);
        c.subscribed_rate = rate;
        c.rates.assign(n, rate);
        c.window_limit = window_limit;
        c.epsilon = epsilon;
        return c;
    }
};

}  // namespace eponq
