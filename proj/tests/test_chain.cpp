#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "eponq/chain.hpp"
#include "oracles.hpp"

using namespace eponq;
using namespace eponq::chain;

namespace {

constexpr unsigned kOnus = 32;
constexpr double kGuard = 1.512;
const auto kDet = ServiceTimeDist::deterministic(1.0);

SystemConfig scenario(double pkts_per_ms, std::optional<std::uint64_t> window) {
    return SystemConfig::homogeneous_at(kOnus, kGuard, kDet, pkts_per_ms / 1000.0, window);
}

GeneratingFunctionParams high_rate_params(std::uint64_t window) {
    return {0.021875, 161.28, kOnus * 3.583, window};
}

double q_sum(const std::vector<double>& q) { return std::accumulate(q.begin(), q.end(), 0.0); }

}  // namespace

TEST(ArrivalPgf, UnitValueAndMean) {
    const auto p = high_rate_params(9);
    EXPECT_NEAR(std::abs(arrival_pgf(p, 1.0) - cplx(1.0)), 0.0, 1e-15);
    const double h = 1e-6;
    const double deriv = (arrival_pgf(p, 1.0 + h).real() - arrival_pgf(p, 1.0 - h).real()) / (2 * h);
    EXPECT_LT(std::abs(deriv - p.arrivals_mean()) / p.arrivals_mean(), 1e-6);
}

TEST(ArrivalPgf, ValueAtZero) {
    const auto p = high_rate_params(9);
    const double lm = 0.021875 * 161.28;
    const double lv = 0.021875 * 0.021875 * kOnus * 3.583;
    EXPECT_NEAR(arrival_pgf(p, 0.0).real(), std::exp(-lm + 0.5 * lv), 1e-15);
    EXPECT_NEAR(arrival_pgf(p, 0.0).real(), 0.0301797, 1e-6);
}

TEST(Roots, WindowOneHasNone) {
    GeneratingFunctionParams p{0.001, 48.384, 0.0, 1};
    EXPECT_TRUE(find_unit_disk_roots(p).empty());
    const auto q = solve_boundary_probs({}, p);
    ASSERT_EQ(q.size(), 1u);
    EXPECT_NEAR(q[0], 1.0 - p.arrivals_mean(), 1e-15);
}

TEST(Roots, WindowTwoMatchesBisection) {
    for (double var : {0.0, 10.0, 112.0, 300.0}) {
        GeneratingFunctionParams p{0.01, 161.28, var, 2};
        if (!(p.arrivals_mean() > p.arrivals_var())) continue;
        auto g = [&](double z) { return z * z - arrival_pgf(p, z).real(); };
        // g(−1) > 0 and g(0) = −H(0) < 0.
        double lo = -1.0;
        double hi = 0.0;
        ASSERT_GT(g(lo), 0.0);
        ASSERT_LT(g(hi), 0.0);
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) > 0.0 ? lo : hi) = mid;
        }
        const auto roots = find_unit_disk_roots(p);
        ASSERT_EQ(roots.size(), 1u);
        EXPECT_NEAR(roots[0].real(), 0.5 * (lo + hi), 1e-10);
        EXPECT_NEAR(roots[0].imag(), 0.0, 1e-12);
    }
}

TEST(Roots, ResidualsDiskAndConjugacy) {
    for (std::uint64_t m : {3u, 5u, 9u, 13u, 25u, 40u}) {
        for (double var_scale : {0.0, 1.0, 3.0}) {
            // λμ_C must stay below M for the smallest window.
            GeneratingFunctionParams p{m < 4 ? 0.01 : 0.021875, 161.28, var_scale * kOnus * 3.583, m};
            const auto roots = find_unit_disk_roots(p);
            ASSERT_EQ(roots.size(), m - 1);
            for (const auto& z : roots) {
                EXPECT_LT(std::abs(std::pow(z, static_cast<int>(m)) - arrival_pgf(p, z)), 1e-10);
                EXPECT_LT(std::abs(z), 1.0);
                const bool has_conjugate = std::any_of(roots.begin(), roots.end(), [&](const cplx& w) {
                    return std::abs(w - std::conj(z)) < 1e-9;
                });
                EXPECT_TRUE(has_conjugate) << "M=" << m << " z=" << z;
            }
        }
    }
}

TEST(Roots, UnstableChainRejected) {
    GeneratingFunctionParams p{0.03, 161.28, 10.0, 4};
    EXPECT_THROW(find_unit_disk_roots(p), SaturationError);
}

TEST(BoundaryProbs, NormalisationAndRange) {
    for (std::uint64_t m : {2u, 4u, 9u, 16u}) {
        auto p = high_rate_params(m);
        if (m < 4) p.rate = 0.01;
        const auto q = solve_boundary_probs(find_unit_disk_roots(p), p);
        double lhs = 0.0;
        for (std::size_t n = 0; n < q.size(); ++n) {
            EXPECT_GE(q[n], 0.0);
            EXPECT_LE(q[n], 1.0);
            lhs += q[n] * static_cast<double>(m - n);
        }
        EXPECT_NEAR(lhs, static_cast<double>(m) - p.arrivals_mean(), 1e-8);
        EXPECT_LE(q_sum(q), 1.0 + 1e-12);
    }
}

TEST(BoundaryProbs, ZeroRateLimit) {
    auto c = scenario(1e-6, 5);
    const auto sol = iterate_K2(c);
    EXPECT_NEAR(sol.q[0], 1.0, 1e-6);
    for (std::size_t n = 1; n < sol.q.size(); ++n) EXPECT_NEAR(sol.q[n], 0.0, 1e-6);

    const auto idle = iterate_K2(scenario(0.0, 5));
    EXPECT_EQ(idle.q[0], 1.0);
    EXPECT_EQ(idle.k_second, 0.0);
}

TEST(Iteration, WindowOneGivesKSquaredEqualsK) {
    for (double r : {1.0, 3.0, 6.0}) {
        const auto c = scenario(r, 1);
        const auto sol = iterate_K2(c);
        const double k_mean = c.per_onu_rate() * model::mean_cycle(kOnus, kGuard, c.offered_load());
        EXPECT_NEAR(sol.k_second, k_mean, 1e-9);
        EXPECT_NEAR(1.0 - sol.q[0], k_mean, 1e-9);
    }
}

TEST(Iteration, HighRateCloseToRegularClosedForm) {
    const auto sol = iterate_K2(scenario(21.875, 9));
    const double regular = sizing::regular_K2(0.7, kGuard, 0.7, kOnus, kDet);
    EXPECT_NEAR(regular, 16.030, 1e-3);
    EXPECT_LT(std::abs(sol.k_second - regular) / regular, 0.02);
    EXPECT_NEAR(sol.k_second, 15.967249, 1e-5);
}

// Light load with the optimizer's window: Pr{l ≥ M} ≤ ε so Q ≈ H.
TEST(Iteration, LightLoadMatchesRegularClosedForm) {
    for (double rho_e : {0.05, 0.1, 0.2, 0.3}) {
        auto c = scenario(rho_e / kOnus * 1000.0, std::nullopt);
        c.window_limit = sizing::optimize_tw(sizing::queue_moments(c), c.epsilon);
        const auto sol = iterate_K2(c);
        const double regular = sizing::regular_K2(rho_e, kGuard, rho_e, kOnus, kDet);
        EXPECT_LT(std::abs(sol.k_second - regular) / regular, 0.02) << "rho_E=" << rho_e;
    }
}

TEST(Iteration, ConvergesQuicklyOnAcceptanceGrid) {
    for (double sub : {5.0, 10.0, 15.0, 20.0, 25.0, 9.375, 21.875, 3.125, 25.0}) {
        for (double eps : {0.001, 0.005, 0.01, 0.05, 0.1}) {
            auto c = scenario(sub, std::nullopt);
            c.epsilon = eps;
            const auto q = sizing::queue_moments(c);
            for (auto m : {sizing::tw_approx(q, eps), sizing::optimize_tw(q, eps)}) {
                c.window_limit = m;
                const auto sol = iterate_K2(c);
                EXPECT_LE(sol.iterations, 100);
                EXPECT_LE(sol.residual, 1e-8);
            }
        }
    }
}

TEST(Iteration, FixedPointConsistency) {
    for (double r : {9.375, 21.875, 25.0}) {
        auto c = scenario(r, std::nullopt);
        c.window_limit = sizing::tw_approx(sizing::queue_moments(c), 0.05);
        const auto sol = iterate_K2(c);
        const auto again = chain_step(c, sol.k_second);
        EXPECT_LE(std::abs(again.k_second - sol.k_second), 1e-8);
    }
}

TEST(Iteration, RequiresFiniteWindow) { EXPECT_THROW(iterate_K2(scenario(10.0, std::nullopt)), ConfigError); }

TEST(AnalyticReport, LimitedAboveGatedLowerBound) {
    const auto limited = analytic_report(scenario(21.875, 9));
    const auto gated = analytic_report(scenario(21.875, std::nullopt));
    EXPECT_TRUE(std::isfinite(limited.wait));
    EXPECT_GT(limited.wait, gated.wait);
    EXPECT_EQ(limited.chain_iterations, 6u);
    EXPECT_NEAR(limited.tail_prob(), 0.0111197, 1e-6);
}

TEST(AnalyticReport, BusyVarianceVanishesNearSaturation) {
    for (std::uint64_t m : {3u, 9u}) {
        const double lambda_hat = sizing::stable_rate(static_cast<double>(m), kOnus, 1.0, kGuard);
        const double r = 0.999 * lambda_hat * 1000.0;
        const auto limited = analytic_report(scenario(r, m));
        const auto gated = analytic_report(scenario(r, std::nullopt));
        EXPECT_LT(limited.busy_var, 0.05 * gated.busy_var) << "M=" << m;
    }
}

TEST(AnalyticReport, SaturatedWindowIsTyped) {
    EXPECT_THROW(analytic_report(scenario(21.875, 3)), SaturationError);
}

class LindleyOracle : public ::testing::TestWithParam<std::pair<double, std::uint64_t>> {};

TEST_P(LindleyOracle, ChainMatchesMonteCarlo) {
    const auto [rate, window] = GetParam();
    const auto sol = iterate_K2(scenario(rate, window));
    const auto& p = sol.params;
    const auto mc = oracle::lindley_monte_carlo(p.rate, p.cycle_mean, p.cycle_var, window, 1'000'000, 2024);
    EXPECT_LT(oracle::tv_distance(sol.q, mc), 0.02);
    EXPECT_NEAR(1.0 - q_sum(sol.q), mc.tail(window), 0.01);
}

INSTANTIATE_TEST_SUITE_P(BaselineScenarios, LindleyOracle,
                         ::testing::Values(std::pair{9.375, std::uint64_t{3}}, std::pair{21.875, std::uint64_t{9}},
                                           std::pair{15.0, std::uint64_t{6}}, std::pair{25.0, std::uint64_t{13}}));
