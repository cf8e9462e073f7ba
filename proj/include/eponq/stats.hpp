#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include <boost/math/distributions/students_t.hpp>

namespace eponq::stats {

/// Streaming mean/variance (Welford) with Chan's pairwise merge.
struct RunningMoments {
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) noexcept {
        ++count;
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }

    void merge(const RunningMoments& o) noexcept {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        const double n = static_cast<double>(count + o.count);
        const double d = o.mean - mean;
        mean += d * static_cast<double>(o.count) / n;
        m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
        count += o.count;
    }

    /// Unbiased sample variance.
    double variance() const noexcept { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

/// Two-sided Student-t critical value.
inline double t_critical(double confidence, std::uint64_t dof) {
    if (dof == 0) return INFINITY;
    boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.5 + confidence / 2.0);
}

struct Interval {
    double mean = 0.0;
    double half_width = 0.0;
};

/// Confidence interval from (approximately independent) batch means.
inline Interval batch_means_interval(std::span<const double> batch_means, double confidence = 0.95) {
    RunningMoments m;
    for (double x : batch_means) m.add(x);
    Interval out{m.mean, INFINITY};
    if (m.count > 1)
        out.half_width = t_critical(confidence, m.count - 1) * std::sqrt(m.variance() / static_cast<double>(m.count));
    return out;
}

/// Binomial standard error sqrt(p(1−p)/n).
inline double binomial_stderr(double p, std::uint64_t n) {
    return n == 0 ? INFINITY : std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace eponq::stats
