#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "eponq/errors.hpp"
#include "eponq/rng.hpp"

namespace eponq {

/// Packet transmission time distribution. All times in microseconds.
class ServiceTimeDist {
public:
    struct Deterministic {
        double value_us;
        bool operator==(const Deterministic&) const = default;
    };
    struct Exponential {
        double mean_us;
        bool operator==(const Exponential&) const = default;
    };
    struct Empirical {
        std::vector<double> values_us;
        std::vector<double> probabilities;
        bool operator==(const Empirical&) const = default;
    };
    using Kind = std::variant<Deterministic, Exponential, Empirical>;

    static ServiceTimeDist deterministic(double value_us) {
        return ServiceTimeDist(Deterministic{value_us});
    }
    static ServiceTimeDist exponential(double mean_us) {
        return ServiceTimeDist(Exponential{mean_us});
    }
    static ServiceTimeDist empirical(std::vector<double> values_us, std::vector<double> probabilities) {
        return ServiceTimeDist(Empirical{std::move(values_us), std::move(probabilities)});
    }

    const Kind& kind() const noexcept { return kind_; }
    bool is_deterministic() const noexcept { return std::holds_alternative<Deterministic>(kind_); }

    /// First moment X̄ (μs).
    double mean() const noexcept { return mean_; }
    /// Second moment E[X²] (μs²).
    double second_moment() const noexcept { return second_; }
    double variance() const noexcept {
        return is_deterministic() ? 0.0 : std::max(0.0, second_ - mean_ * mean_);
    }

    double sample(CounterRng& rng) const {
        switch (kind_.index()) {
            case 0:
                return std::get<Deterministic>(kind_).value_us;
            case 1:
                return rng.exponential(std::get<Exponential>(kind_).mean_us);
            default: {
                const auto& e = std::get<Empirical>(kind_);
                const double u = rng.uniform();
                auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
                auto idx = static_cast<std::size_t>(it - cumulative_.begin());
                return e.values_us[std::min(idx, e.values_us.size() - 1)];
            }
        }
    }

    bool operator==(const ServiceTimeDist& o) const { return kind_ == o.kind_; }

private:
    explicit ServiceTimeDist(Kind kind) : kind_(std::move(kind)) {
        std::visit([this](const auto& k) { init(k); }, kind_);
    }

    void init(const Deterministic& d) {
        require_positive(d.value_us, "service.value_us");
        mean_ = d.value_us;
        second_ = d.value_us * d.value_us;
    }

    void init(const Exponential& e) {
        require_positive(e.mean_us, "service.mean_us");
        mean_ = e.mean_us;
        second_ = 2.0 * e.mean_us * e.mean_us;
    }

    void init(const Empirical& e) {
        if (e.values_us.empty() || e.values_us.size() != e.probabilities.size())
            throw ConfigError("service", "empirical values and probabilities must be non-empty and of equal length");
        double total = 0.0;
        for (std::size_t i = 0; i < e.values_us.size(); ++i) {
            require_positive(e.values_us[i], "service.values_us");
            if (!(e.probabilities[i] >= 0.0))
                throw ConfigError("service.probabilities", "probabilities must be non-negative");
            total += e.probabilities[i];
            mean_ += e.probabilities[i] * e.values_us[i];
            second_ += e.probabilities[i] * e.values_us[i] * e.values_us[i];
            cumulative_.push_back(total);
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw ConfigError("service.probabilities", "probabilities must sum to 1 (got " + std::to_string(total) + ")");
        cumulative_.back() = 1.0;
    }

    static void require_positive(double v, const char* field) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError(field, "service times must be strictly positive and finite");
    }

    Kind kind_;
    double mean_ = 0.0;
    double second_ = 0.0;
    std::vector<double> cumulative_;
};

}  // namespace eponq
