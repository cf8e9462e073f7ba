#pragma once

// Closed-form moments of the M/G/1 queue with vacations and gated-limited
// service, specialised to an EPON ONU. Times in μs, rates in packets/μs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "eponq/errors.hpp"
#include "eponq/service_time.hpp"

namespace eponq::model {

namespace detail {
inline void require_unsaturated(double rho_e) {
    if (!(rho_e >= 0.0)) throw SaturationError("offered load must be non-negative");
    if (!(rho_e < 1.0))
        throw SaturationError("offered load rho_E = " + std::to_string(rho_e) + " >= 1: the EPON is saturated");
}
}  // namespace detail

/// Distribution b_0..b_M of the number of packets served in one busy period.
/// b_0 is the empty grant.
struct BusyPeriodDist {
    std::vector<double> b;

    double mean() const {
        double s = 0.0;
        for (std::size_t k = 1; k < b.size(); ++k) s += static_cast<double>(k) * b[k];
        return s;
    }
    double second_moment() const {
        double s = 0.0;
        for (std::size_t k = 1; k < b.size(); ++k) s += static_cast<double>(k * k) * b[k];
        return s;
    }
    double total() const { return std::accumulate(b.begin(), b.end(), 0.0); }
};

/// Mean vacation V̄ = (N − ρ_E)·G/(1 − ρ_E).
inline double vacation_mean(unsigned n, double guard_us, double rho_e) {
    detail::require_unsaturated(rho_e);
    return (static_cast<double>(n) - rho_e) * guard_us / (1.0 - rho_e);
}

/// Mean cycle μ_C = N·G/(1 − ρ_E).
inline double mean_cycle(unsigned n, double guard_us, double rho_e) {
    detail::require_unsaturated(rho_e);
    return static_cast<double>(n) * guard_us / (1.0 - rho_e);
}

/// Mean packets per busy period K̄ = λ_E·G/(1 − ρ_E); λ_E is the EPON-wide rate.
inline double mean_K(double total_rate, double guard_us, double rho_e) {
    detail::require_unsaturated(rho_e);
    return total_rate * guard_us / (1.0 - rho_e);
}

/// σ_B² = X̄²(E[K²] − K̄²) + K̄·Var(X).
inline double busy_period_variance(double x_mean, double x_second, double k_mean, double k_second) {
    const double var_k = k_second - k_mean * k_mean;
    const double var_x = x_second - x_mean * x_mean;
    return x_mean * x_mean * var_k + k_mean * var_x;
}

inline double busy_period_variance(const ServiceTimeDist& dist, double k_mean, double k_second) {
    return busy_period_variance(dist.mean(), dist.second_moment(), k_mean, k_second);
}

/// E[V²] = V̄² + (N − 1)·σ_B².
inline double second_vacation_moment(double v_mean, unsigned n, const ServiceTimeDist& dist, double k_mean,
                                     double k_second) {
    return v_mean * v_mean + (static_cast<double>(n) - 1.0) * busy_period_variance(dist, k_mean, k_second);
}

/// P_k = k·b_k/K̄: probability that a packet is served in a B_k. Index 0 is
/// always zero since an empty grant serves nobody.
inline std::vector<double> served_in_Bk_prob(const BusyPeriodDist& dist) {
    const double k_mean = dist.mean();
    if (!(k_mean > 0.0)) throw ModelValidityError("P_k undefined: no packets are ever served (K = 0)");
    std::vector<double> p(dist.b.size(), 0.0);
    for (std::size_t k = 1; k < dist.b.size(); ++k) p[k] = static_cast<double>(k) * dist.b[k] / k_mean;
    return p;
}

/// E[Δ] = (E[K²] − K̄)/(2K̄), packets served ahead in the same busy period.
/// Defined as 0 when K̄ = 0 (idle limit).
inline double mean_delta(double k_mean, double k_second) {
    if (k_mean <= 0.0) return 0.0;
    return (k_second - k_mean) / (2.0 * k_mean);
}

inline double mean_delta(const BusyPeriodDist& dist) {
    const double k_mean = dist.mean();
    if (!(k_mean > 0.0)) throw ModelValidityError("E[Delta] undefined: no packets are ever served (K = 0)");
    return mean_delta(k_mean, dist.second_moment());
}

/// m̄ = λV̄ + ρ·E[Δ], by Little's law on the inside-gate queue.
inline double mean_inside_gate(double rate, double v_mean, double k_mean, double k_second, double x_mean) {
    return rate * v_mean + rate * x_mean * mean_delta(k_mean, k_second);
}

/// W̄ together with its decomposition W̄ = R̄ + N_Q·X̄ + Ȳ.
struct WaitingTime {
    double wait;         ///< W̄ (μs)
    double residual;     ///< R̄ (μs)
    double queue_len;    ///< N_Q = λW̄ (packets)
    double vacations;    ///< Ȳ (μs)
    double inside_gate;  ///< m̄ (packets)
    double outside_gate; ///< n̄ (packets)
};

/// Mean waiting time of the gated-limited vacation queue. `window_limit` may be
/// +inf, which yields the gated-service form. Throws SaturationError when
/// 1 − ρ − λV̄/M ≤ 0.
inline WaitingTime mean_waiting_time(double rate, double x_mean, double x_second, double v_mean, double v_second,
                                     double k_mean, double k_second, double window_limit) {
    const double rho = rate * x_mean;
    const double inv_m = std::isinf(window_limit) ? 0.0 : 1.0 / window_limit;
    const double denom = 1.0 - rho - rate * v_mean * inv_m;
    if (!(denom > 0.0))
        throw SaturationError("gated-limited queue is unstable: 1 - rho - lambda*V/M = " + std::to_string(denom));

    const double delta = mean_delta(k_mean, k_second);
    const double residual = rate * x_second / 2.0 + (1.0 - rho) * v_second / (2.0 * v_mean);
    const double numer = residual + (1.0 - (1.0 + rho) * delta * inv_m - rate * v_mean * inv_m) * v_mean;

    WaitingTime w{};
    w.wait = numer / denom;
    w.residual = residual;
    w.queue_len = rate * w.wait;
    w.inside_gate = rate * v_mean + rho * delta;
    w.outside_gate = w.queue_len - w.inside_gate;
    // Ȳ = (1 + E⌊n/M⌋)·V̄ with E⌊n/M⌋ = (n̄ − E[Δ])/M.
    w.vacations = (1.0 + (w.outside_gate - delta) * inv_m) * v_mean;
    return w;
}

/// Every derived moment for one homogeneous ONU.
struct AnalyticReport {
    double v_mean = 0.0;       ///< V̄ (μs)
    double v_second = 0.0;     ///< E[V²] (μs²)
    double busy_mean = 0.0;    ///< B̄ (μs)
    double busy_var = 0.0;     ///< σ_B² (μs²)
    double k_mean = 0.0;       ///< K̄
    double k_second = 0.0;     ///< E[K²]
    double cycle_mean = 0.0;   ///< μ_C (μs)
    double cycle_var = 0.0;    ///< σ_C² (μs²)
    std::vector<double> q;     ///< q_0..q_{M-1}; empty under gated service
    double residual = 0.0;     ///< R̄ (μs)
    double vacations = 0.0;    ///< Ȳ (μs)
    double inside_gate = 0.0;  ///< m̄
    double outside_gate = 0.0; ///< n̄
    double queue_len = 0.0;    ///< N_Q
    double wait = 0.0;         ///< W̄ (μs)
    double rho = 0.0;
    double rho_e = 0.0;
    double window_limit = std::numeric_limits<double>::infinity();
    unsigned chain_iterations = 0;

    /// Pr{l ≥ M} implied by q.
    double tail_prob() const {
        if (q.empty()) return 0.0;
        return std::max(0.0, 1.0 - std::accumulate(q.begin(), q.end(), 0.0));
    }
};

}  // namespace eponq::model
