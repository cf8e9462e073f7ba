#pragma once

// Transmission-window sizing from the Chernoff bound on the queue length
// reported at the start of a cycle, for an ONU running at its subscribed rate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "eponq/config.hpp"
#include "eponq/errors.hpp"
#include "eponq/model.hpp"

namespace eponq::sizing {

/// E[K²] in the regular case, where the reported queue almost never exceeds
/// the window and Q(z) ≈ H(z).
inline double regular_K2(double total_rate, double guard_us, double rho_e, unsigned n, const ServiceTimeDist& dist) {
    const double k_mean = model::mean_K(total_rate, guard_us, rho_e);
    const double nd = static_cast<double>(n);
    const double var_x = dist.second_moment() - dist.mean() * dist.mean();
    const double numer = total_rate * total_rate * total_rate * guard_us * var_x / (nd * (1.0 - rho_e)) + k_mean;
    return k_mean * k_mean + numer / (1.0 - rho_e * rho_e / nd);
}

/// Regular-case moments of the reported queue length l.
struct QueueLengthModel {
    double mean = 0.0;           ///< μ_l
    double variance = 0.0;       ///< σ_l²
    double arrivals_mean = 0.0;  ///< λμ_C
    double arrivals_var = 0.0;   ///< λ²σ_C² = σ_l² − μ_l
    double alpha = 0.0;          ///< ln(1/ε)
};

inline double alpha_of(double epsilon) { return std::log(1.0 / epsilon); }

/// μ_l = λ_E·G/(1−ρ_E); σ_l² = λ_E³·G·E[X²]/((1−ρ_E)(N−ρ_E²)) + μ_l, at per-ONU rate `rate`.
inline QueueLengthModel queue_moments(unsigned n, double guard_us, const ServiceTimeDist& dist, double rate,
                                      double epsilon) {
    const double total = rate * static_cast<double>(n);
    const double rho_e = total * dist.mean();
    model::detail::require_unsaturated(rho_e);
    QueueLengthModel q;
    q.mean = total * guard_us / (1.0 - rho_e);
    q.arrivals_mean = q.mean;
    q.arrivals_var = total * total * total * guard_us * dist.second_moment() /
                     ((1.0 - rho_e) * (static_cast<double>(n) - rho_e * rho_e));
    q.variance = q.arrivals_var + q.mean;
    q.alpha = alpha_of(epsilon);
    return q;
}

/// Moments at the config's subscribed rate.
inline QueueLengthModel queue_moments(const SystemConfig& config) {
    return queue_moments(config.onu_count, config.guard_us, config.service, config.subscribed_rate, config.epsilon);
}

/// exp[−M·ln z + λμ_C(z−1) + ½λ²σ_C²(z−1)²] ≥ Pr{l ≥ M}, for z > 1.
inline double chernoff_bound(const QueueLengthModel& m, double window, double z) {
    if (!(z > 1.0)) throw ConfigError("z", "the Chernoff parameter must exceed 1");
    const double x = z - 1.0;
    return std::exp(-window * std::log(z) + m.arrivals_mean * x + 0.5 * m.arrivals_var * x * x);
}

/// Minimiser z* of the bound at threshold μ_l + t. Falls back to the
/// Poisson-only optimiser (μ_l + t)/λμ_C when λ²σ_C² vanishes.
inline double optimal_z(double t, double arrivals_mean, double arrivals_var) {
    const double target = arrivals_mean + t;
    if (arrivals_var <= 0.0) {
        if (arrivals_mean <= 0.0) return std::numeric_limits<double>::infinity();
        return target / arrivals_mean;
    }
    const double b = arrivals_mean - arrivals_var;
    return (std::sqrt(b * b + 4.0 * target * arrivals_var) - b) / (2.0 * arrivals_var);
}

/// inf_z f(M − μ_l, z), evaluated at z*. Returns 0 for an idle ONU.
inline double tail_bound_at(const QueueLengthModel& m, double window) {
    const double z = optimal_z(window - m.mean, m.arrivals_mean, m.arrivals_var);
    if (std::isinf(z)) return 0.0;
    if (z <= 1.0) return 1.0;
    return chernoff_bound(m, window, z);
}

namespace detail {
inline std::uint64_t ceil_window(double x) {
    return static_cast<std::uint64_t>(std::max(1.0, std::ceil(x)));
}
}  // namespace detail

struct WindowBounds {
    std::uint64_t lower;  ///< M1
    std::uint64_t upper;  ///< M2
};

/// M1 = ⌈μ_l + λσ_C·√(2α)⌉, M2 = ⌈μ_l + α + √(α² + 2ασ_l²)⌉, each at least 1.
inline WindowBounds tw_bounds(const QueueLengthModel& m, double epsilon) {
    const double a = alpha_of(epsilon);
    const double lower = m.mean + std::sqrt(std::max(0.0, m.arrivals_var)) * std::sqrt(2.0 * a);
    const double upper = m.mean + a + std::sqrt(a * a + 2.0 * a * m.variance);
    return {detail::ceil_window(lower), detail::ceil_window(upper)};
}

/// Gaussian-tail estimate M̂ = ⌈μ_l + σ_l·√(2α)⌉.
inline std::uint64_t tw_approx(const QueueLengthModel& m, double epsilon) {
    return detail::ceil_window(m.mean + std::sqrt(m.variance) * std::sqrt(2.0 * alpha_of(epsilon)));
}

/// Smallest integer window in [M1, M2] whose optimised Chernoff bound is ≤ ε,
/// found by real-valued bisection seeded at M̂ and terminated once low and up
/// share a ceiling.
inline std::uint64_t optimize_tw(const QueueLengthModel& m, double epsilon) {
    const auto [m1, m2] = tw_bounds(m, epsilon);
    if (m1 == m2) return m1;
    auto satisfied = [&](double window) { return tail_bound_at(m, window) <= epsilon; };

    double low = static_cast<double>(m1);
    double up = static_cast<double>(m2);
    double window = static_cast<double>(tw_approx(m, epsilon));
    for (int iter = 0; iter < 256; ++iter) {
        if (satisfied(window))
            up = window;
        else
            low = window;
        if (!(std::ceil(low) < std::ceil(up))) break;
        window = 0.5 * (low + up);
    }
    const auto result = static_cast<std::uint64_t>(std::ceil(up));
    if (!satisfied(static_cast<double>(result)))
        throw NumericalError("window bisection ended on an infeasible size " + std::to_string(result),
                             tail_bound_at(m, static_cast<double>(result)));
    return std::max(result, m1);
}

/// λ̂ = M/(N(M·X̄ + G)): largest per-ONU rate a window of M keeps stable.
inline double stable_rate(double window, unsigned n, double x_mean, double guard_us) {
    if (std::isinf(window)) return 1.0 / (static_cast<double>(n) * x_mean);
    return window / (static_cast<double>(n) * (window * x_mean + guard_us));
}

enum class TrafficRegion { subscribed, overloaded, saturated };

inline std::string_view to_string(TrafficRegion r) {
    switch (r) {
        case TrafficRegion::subscribed: return "subscribed";
        case TrafficRegion::overloaded: return "overloaded";
        default: return "saturated";
    }
}

inline TrafficRegion classify_region(double rate, double subscribed_rate, double stable) {
    if (rate <= subscribed_rate) return TrafficRegion::subscribed;
    if (rate < stable) return TrafficRegion::overloaded;
    return TrafficRegion::saturated;
}

inline constexpr double epsilon_practical_min = 0.001;
inline constexpr double epsilon_practical_max = 0.1;

struct TwRecommendation {
    QueueLengthModel queue;
    std::uint64_t lower = 0;     ///< M1
    std::uint64_t approx = 0;    ///< M̂, the recommended deployment value
    std::uint64_t optimum = 0;   ///< M*
    std::uint64_t upper = 0;     ///< M2
    double epsilon = default_epsilon;
    double subscribed_rate = 0.0;  ///< packets/μs
    double stable_rate = 0.0;      ///< λ̂ for M = M̂, packets/μs
    double saturation_rate = 0.0;  ///< 1/(N·X̄), packets/μs
    std::vector<std::string> warnings;
};

inline TwRecommendation recommend(const SystemConfig& config) {
    TwRecommendation r;
    r.epsilon = config.epsilon;
    r.subscribed_rate = config.subscribed_rate;
    r.queue = queue_moments(config);
    const auto bounds = tw_bounds(r.queue, config.epsilon);
    r.lower = bounds.lower;
    r.upper = bounds.upper;
    r.approx = tw_approx(r.queue, config.epsilon);
    r.optimum = optimize_tw(r.queue, config.epsilon);
    r.stable_rate = stable_rate(static_cast<double>(r.approx), config.onu_count, config.service.mean(), config.guard_us);
    r.saturation_rate = 1.0 / (static_cast<double>(config.onu_count) * config.service.mean());
    if (config.epsilon < epsilon_practical_min || config.epsilon > epsilon_practical_max)
        r.warnings.push_back("epsilon = " + std::to_string(config.epsilon) +
                             " lies outside the practical range [0.001, 0.1]");
    return r;
}

}  // namespace eponq::sizing
