#pragma once

// Embedded Markov chain at cycle boundaries: l_{j+1} = (l_j − M)⁺ + a_j, with
// the per-cycle arrival count a_j Poisson-mixed over a Gaussian cycle time.
// The boundary probabilities q_0..q_{M−1} follow from the M−1 zeros of
// z^M − H(z) inside the unit disk plus the normalisation Q(1) = 1; E[K²]
// is the fixed point of the map K² → σ_C² → H → q → K².

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "eponq/config.hpp"
#include "eponq/errors.hpp"
#include "eponq/model.hpp"
#include "eponq/optimizer.hpp"

namespace eponq::chain {

using cplx = std::complex<double>;

/// Parameters of H(z) = exp[−λμ_C(1−z) + ½λ²σ_C²(1−z)²].
struct GeneratingFunctionParams {
    double rate = 0.0;        ///< λ, packets/μs
    double cycle_mean = 0.0;  ///< μ_C, μs
    double cycle_var = 0.0;   ///< σ_C², μs²
    std::uint64_t window = 1; ///< M

    double arrivals_mean() const { return rate * cycle_mean; }
    double arrivals_var() const { return rate * rate * cycle_var; }

    /// log H(z).
    cplx log_pgf(cplx z) const {
        const cplx w = 1.0 - z;
        return -arrivals_mean() * w + 0.5 * arrivals_var() * w * w;
    }
};

/// H(z) = C*(λ(1−z)) with the Gaussian cycle-time transform C*(θ) = exp[−μ_Cθ + ½σ_C²θ²].
inline cplx arrival_pgf(const GeneratingFunctionParams& p, cplx z) { return std::exp(p.log_pgf(z)); }

struct RootOptions {
    double step_tol = 1e-12;       ///< fixed-point convergence on |Δz|
    double residual_tol = 1e-10;   ///< acceptance on |z^M − H(z)|
    int max_iterations = 10000;
};

/// The M−1 zeros of z^M − H(z) strictly inside |z| < 1. Branch m solves
/// z = e^{2πim/M}·exp(log H(z)/M) by fixed-point iteration from z = 0, with
/// a damped pass if the plain map stalls and a Newton polish at the end.
inline std::vector<cplx> find_unit_disk_roots(const GeneratingFunctionParams& p, const RootOptions& opt = {}) {
    const auto big_m = p.window;
    if (big_m < 1) throw ConfigError("window", "must be >= 1");
    if (!(p.arrivals_mean() < static_cast<double>(big_m)))
        throw SaturationError("embedded chain unstable: lambda*mu_C = " + std::to_string(p.arrivals_mean()) +
                              " >= M = " + std::to_string(big_m));
    const double md = static_cast<double>(big_m);

    std::vector<cplx> roots;
    roots.reserve(big_m > 0 ? big_m - 1 : 0);
    for (std::uint64_t m = 1; m < big_m; ++m) {
        const cplx omega = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(m) / md);
        auto map = [&](cplx z) { return omega * std::exp(p.log_pgf(z) / md); };

        cplx z{0.0, 0.0};
        bool converged = false;
        for (double damping : {1.0, 0.5}) {
            for (int it = 0; it < opt.max_iterations; ++it) {
                const cplx next = (1.0 - damping) * z + damping * map(z);
                const double step = std::abs(next - z);
                z = next;
                if (step < opt.step_tol) {
                    converged = true;
                    break;
                }
            }
            if (converged) break;
        }
        // Newton on F(z) = z − map(z); F'(z) = 1 − map(z)·(log H)'(z)/M.
        for (int it = 0; it < 4; ++it) {
            const cplx mz = map(z);
            const cplx dlog = p.arrivals_mean() - p.arrivals_var() * (1.0 - z);
            const cplx deriv = 1.0 - mz * dlog / md;
            if (std::abs(deriv) < 1e-300) break;
            const cplx next = z - (z - mz) / deriv;
            if (!std::isfinite(next.real()) || !std::isfinite(next.imag())) break;
            z = next;
        }
        const double residual = std::abs(std::pow(z, static_cast<int>(big_m)) - arrival_pgf(p, z));
        if (!(residual < opt.residual_tol))
            throw NumericalError("root " + std::to_string(m) + " of z^M = H(z) did not converge", residual);
        if (!(std::abs(z) < 1.0))
            throw NumericalError("root " + std::to_string(m) + " left the unit disk", std::abs(z));
        for (const cplx& other : roots)
            if (std::abs(other - z) < 1e3 * opt.step_tol)
                throw NumericalError("duplicate roots of z^M = H(z); the boundary system is singular",
                                     std::abs(other - z));
        roots.push_back(z);
    }
    return roots;
}

/// Solves Σ_n q_n(z_m^M − z_m^n) = 0 for every root together with
/// Σ_n q_n(M − n) = M − λμ_C. Complex Gaussian elimination, partial pivoting.
inline std::vector<double> solve_boundary_probs(const std::vector<cplx>& roots, const GeneratingFunctionParams& p) {
    const std::size_t m = p.window;
    if (roots.size() + 1 != m)
        throw ConfigError("roots", "expected " + std::to_string(m - 1) + " roots, got " + std::to_string(roots.size()));

    std::vector<std::vector<cplx>> a(m, std::vector<cplx>(m + 1));
    for (std::size_t r = 0; r < roots.size(); ++r) {
        const cplx z = roots[r];
        const cplx zm = std::pow(z, static_cast<int>(m));
        cplx zn{1.0, 0.0};
        for (std::size_t n = 0; n < m; ++n) {
            a[r][n] = zm - zn;
            zn *= z;
        }
        a[r][m] = 0.0;
    }
    for (std::size_t n = 0; n < m; ++n) a[m - 1][n] = static_cast<double>(m - n);
    a[m - 1][m] = static_cast<double>(m) - p.arrivals_mean();

    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-14)
            throw NumericalError("boundary-probability system is singular", std::abs(a[pivot][col]));
        std::swap(a[col], a[pivot]);
        for (std::size_t r = col + 1; r < m; ++r) {
            const cplx f = a[r][col] / a[col][col];
            if (f == cplx{}) continue;
            for (std::size_t c = col; c <= m; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<cplx> x(m);
    for (std::size_t i = m; i-- > 0;) {
        cplx s = a[i][m];
        for (std::size_t c = i + 1; c < m; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }

    std::vector<double> q(m);
    for (std::size_t n = 0; n < m; ++n) {
        if (std::abs(x[n].imag()) > 1e-9)
            throw NumericalError("q_" + std::to_string(n) + " has a non-negligible imaginary part",
                                 std::abs(x[n].imag()));
        const double v = x[n].real();
        if (v < -1e-9)
            throw ModelValidityError("q_" + std::to_string(n) + " = " + std::to_string(v) + " is negative");
        q[n] = std::clamp(v, 0.0, 1.0);
    }
    return q;
}

/// E[K²] = Σ_{n<M} n²q_n + M²(1 − Σ_{n<M} q_n).
inline double k_second_from_q(const std::vector<double>& q) {
    const double m = static_cast<double>(q.size());
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t n = 0; n < q.size(); ++n) {
        sum += q[n];
        sq += static_cast<double>(n * n) * q[n];
    }
    return sq + m * m * (1.0 - sum);
}

struct IterationOptions {
    double delta = 1e-8;
    int max_iterations = 500;
    RootOptions roots{};
};

struct ChainSolution {
    std::vector<double> q;
    std::vector<cplx> roots;
    double k_second = 0.0;
    int iterations = 0;
    double residual = 0.0;          ///< final |ΔE[K²]|
    bool damped = false;
    std::vector<double> trace;      ///< E[K²] after each iteration
    GeneratingFunctionParams params;
};

/// Builds H(z) for a candidate E[K²]. Negative busy-period variances (the
/// K² = 0 seed) are clamped to zero.
inline GeneratingFunctionParams chain_params(const SystemConfig& config, double k_second) {
    const double rate = config.per_onu_rate();
    const double rho_e = config.offered_load();
    GeneratingFunctionParams p;
    p.rate = rate;
    p.cycle_mean = model::mean_cycle(config.onu_count, config.guard_us, rho_e);
    const double k_mean = rate * p.cycle_mean;
    const double busy_var = std::max(0.0, model::busy_period_variance(config.service, k_mean, k_second));
    p.cycle_var = static_cast<double>(config.onu_count) * busy_var;
    p.window = config.window_limit.value_or(0);
    return p;
}

struct ChainStep {
    GeneratingFunctionParams params;
    std::vector<cplx> roots;
    std::vector<double> q;
    double k_second = 0.0;
};

/// One pass of the fixed-point map starting from `k_second`.
inline ChainStep chain_step(const SystemConfig& config, double k_second, const RootOptions& opt = {}) {
    ChainStep s;
    s.params = chain_params(config, k_second);
    s.roots = find_unit_disk_roots(s.params, opt);
    s.q = solve_boundary_probs(s.roots, s.params);
    s.k_second = k_second_from_q(s.q);
    return s;
}

/// Fixed-point iteration on E[K²] seeded at 0. Switches to averaging
/// K²_new = ½(K²_old + K²_step) after the update direction flips twice.
inline ChainSolution iterate_K2(const SystemConfig& config, const IterationOptions& opt = {}) {
    config.validate();
    if (!config.window_limit) throw ConfigError("window_limit", "the embedded chain needs a finite window");
    ChainSolution sol;
    if (config.per_onu_rate() == 0.0) {
        sol.params = chain_params(config, 0.0);
        sol.q.assign(*config.window_limit, 0.0);
        sol.q[0] = 1.0;
        sol.trace.push_back(0.0);
        return sol;
    }

    double k2 = 0.0;
    int flips = 0;
    double last_change = 0.0;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        ChainStep step = chain_step(config, k2, opt.roots);
        const double change = step.k_second - k2;
        if (last_change != 0.0 && (change > 0.0) != (last_change > 0.0)) ++flips;
        last_change = change;
        sol.damped = sol.damped || flips >= 2;

        sol.q = std::move(step.q);
        sol.roots = std::move(step.roots);
        sol.params = step.params;
        sol.iterations = it;
        sol.residual = std::abs(change);
        if (std::abs(change) <= opt.delta) {
            sol.k_second = step.k_second;
            sol.trace.push_back(sol.k_second);
            return sol;
        }
        k2 = sol.damped ? 0.5 * (k2 + step.k_second) : step.k_second;
        sol.trace.push_back(k2);
    }
    std::string trace;
    for (std::size_t i = sol.trace.size() > 5 ? sol.trace.size() - 5 : 0; i < sol.trace.size(); ++i)
        trace += (trace.empty() ? "" : ", ") + std::to_string(sol.trace[i]);
    throw NumericalError("E[K^2] iteration did not converge in " + std::to_string(opt.max_iterations) +
                             " steps; last values: " + trace,
                         sol.residual);
}

/// Every AnalyticReport field for a homogeneous, stable config. Gated
/// service (no window) uses the regular-case E[K²].
inline model::AnalyticReport analytic_report(const SystemConfig& config, const IterationOptions& opt = {}) {
    config.validate();
    const double rate = config.per_onu_rate();
    const auto& dist = config.service;
    const unsigned n = config.onu_count;

    model::AnalyticReport r;
    r.rho_e = config.offered_load();
    r.rho = rate * dist.mean();
    r.window_limit = config.window_limit_or_inf();
    r.v_mean = model::vacation_mean(n, config.guard_us, r.rho_e);
    r.cycle_mean = model::mean_cycle(n, config.guard_us, r.rho_e);
    r.k_mean = model::mean_K(config.total_rate(), config.guard_us, r.rho_e);
    r.busy_mean = r.k_mean * dist.mean();

    if (config.window_limit) {
        if (!(r.k_mean < r.window_limit))
            throw SaturationError("window M = " + std::to_string(*config.window_limit) +
                                  " cannot carry the mean load lambda*mu_C = " + std::to_string(r.k_mean));
        if (rate > 0.0) {
            ChainSolution sol = iterate_K2(config, opt);
            r.k_second = sol.k_second;
            r.q = std::move(sol.q);
            r.chain_iterations = static_cast<unsigned>(sol.iterations);
        } else {
            r.k_second = 0.0;
            r.q.assign(*config.window_limit, 0.0);
            r.q[0] = 1.0;
        }
    } else {
        r.k_second = sizing::regular_K2(config.total_rate(), config.guard_us, r.rho_e, n, dist);
    }

    r.busy_var = std::max(0.0, model::busy_period_variance(dist, r.k_mean, r.k_second));
    r.cycle_var = static_cast<double>(n) * r.busy_var;
    r.v_second = r.v_mean * r.v_mean + (static_cast<double>(n) - 1.0) * r.busy_var;

    const auto w = model::mean_waiting_time(rate, dist.mean(), dist.second_moment(), r.v_mean, r.v_second, r.k_mean,
                                            r.k_second, r.window_limit);
    r.wait = w.wait;
    r.residual = w.residual;
    r.queue_len = w.queue_len;
    r.vacations = w.vacations;
    r.inside_gate = w.inside_gate;
    r.outside_gate = w.outside_gate;
    return r;
}

}  // namespace eponq::chain
