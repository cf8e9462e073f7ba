#pragma once

// JSON scenario documents. Units are part of every field name; rates are
// given in packets/ms and stored in packets/μs.
//
//   {
//     "onu_count": 32,
//     "guard_us": 1.512,
//     "service": {"kind": "deterministic", "value_us": 1.0},
//     "subscribed_rate_pkts_per_ms": 21.875,
//     "rate_pkts_per_ms": 21.875,          // or one entry per ONU
//     "window_limit_pkts": 9,               // omit or null for gated service
//     "epsilon": 0.05
//   }

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "eponq/config.hpp"
#include "eponq/errors.hpp"

namespace eponq::io {

struct ParsedConfig {
    SystemConfig config;
    std::vector<std::string> warnings;
};

namespace detail {

using nlohmann::json;

inline double number(const json& doc, const char* key) {
    const auto it = doc.find(key);
    if (it == doc.end()) throw ConfigError(key, "missing required field");
    if (!it->is_number()) throw ConfigError(key, "must be a number");
    return it->get<double>();
}

inline std::vector<double> number_list(const json& v, const char* key) {
    if (!v.is_array()) throw ConfigError(key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(key, "must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

inline ServiceTimeDist parse_service(const json& doc) {
    const auto it = doc.find("service");
    if (it == doc.end()) throw ConfigError("service", "missing required field");
    if (!it->is_object()) throw ConfigError("service", "must be an object");
    const auto kind = it->value("kind", std::string{});
    if (kind == "deterministic") return ServiceTimeDist::deterministic(number(*it, "value_us"));
    if (kind == "exponential") return ServiceTimeDist::exponential(number(*it, "mean_us"));
    if (kind == "empirical") {
        if (!it->contains("values_us") || !it->contains("probabilities"))
            throw ConfigError("service", "empirical service needs values_us and probabilities");
        return ServiceTimeDist::empirical(number_list(it->at("values_us"), "service.values_us"),
                                          number_list(it->at("probabilities"), "service.probabilities"));
    }
    throw ConfigError("service.kind", "expected deterministic, exponential or empirical, got '" + kind + "'");
}

inline std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace detail

inline ParsedConfig parse_config(std::string_view text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError("", "syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                                  ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("", "the configuration must be a JSON object");

    ParsedConfig out;
    SystemConfig& c = out.config;

    static const std::set<std::string> known = {"onu_count",       "guard_us",
                                                "service",         "subscribed_rate_pkts_per_ms",
                                                "rate_pkts_per_ms", "window_limit_pkts",
                                                "epsilon"};
    for (const auto& [key, _] : doc.items())
        if (!known.contains(key)) out.warnings.push_back("ignoring unknown field '" + key + "'");

    const double n = detail::number(doc, "onu_count");
    if (n < 1 || n != std::floor(n) || n > 1e6) throw ConfigError("onu_count", "must be a positive integer");
    c.onu_count = static_cast<std::uint32_t>(n);
    c.guard_us = detail::number(doc, "guard_us");
    c.service = detail::parse_service(doc);

    std::vector<double> rates_ms;
    if (auto it = doc.find("rate_pkts_per_ms"); it != doc.end()) {
        if (it->is_array()) {
            rates_ms = detail::number_list(*it, "rate_pkts_per_ms");
            if (rates_ms.size() != c.onu_count)
                throw ConfigError("rate_pkts_per_ms", "expected " + std::to_string(c.onu_count) + " entries, got " +
                                                          std::to_string(rates_ms.size()));
        } else if (it->is_number()) {
            rates_ms.assign(c.onu_count, it->get<double>());
        } else {
            throw ConfigError("rate_pkts_per_ms", "must be a number or an array of numbers");
        }
    }
    if (doc.contains("subscribed_rate_pkts_per_ms")) {
        c.subscribed_rate = units::per_ms_to_per_us(detail::number(doc, "subscribed_rate_pkts_per_ms"));
        if (rates_ms.empty()) rates_ms.assign(c.onu_count, units::per_us_to_per_ms(c.subscribed_rate));
    } else {
        if (rates_ms.empty())
            throw ConfigError("rate_pkts_per_ms", "give rate_pkts_per_ms or subscribed_rate_pkts_per_ms");
        if (!std::all_of(rates_ms.begin(), rates_ms.end(), [&](double r) { return r == rates_ms.front(); }))
            throw ConfigError("subscribed_rate_pkts_per_ms", "required when ONU rates differ");
        c.subscribed_rate = units::per_ms_to_per_us(rates_ms.front());
    }
    for (double r : rates_ms) c.rates.push_back(units::per_ms_to_per_us(r));

    if (auto it = doc.find("window_limit_pkts"); it != doc.end() && !it->is_null()) {
        if (!it->is_number_integer() || it->get<long long>() < 1)
            throw ConfigError("window_limit_pkts", "must be a positive integer (omit it for gated service)");
        c.window_limit = it->get<std::uint64_t>();
    }

    if (doc.contains("epsilon")) {
        c.epsilon = detail::number(doc, "epsilon");
    } else {
        c.epsilon = default_epsilon;
        out.warnings.push_back("epsilon not given; using the default 0.05");
    }

    try {
        c.validate();
    } catch (const ConfigError& e) {
        static const std::map<std::string, std::string, std::less<>> doc_names = {
            {"rates", "rate_pkts_per_ms"},
            {"subscribed_rate", "subscribed_rate_pkts_per_ms"},
            {"window_limit", "window_limit_pkts"}};
        const auto it = doc_names.find(e.field());
        if (it == doc_names.end()) throw;
        std::string msg = e.what();
        throw ConfigError(it->second, msg.substr(e.field().size() + 2));
    }
    return out;
}

/// Packets/ms value whose conversion back to packets/μs is bit-identical to
/// `per_us`. Not every double is a quotient by 1000; for those the nearest
/// value is returned and the round trip is off by one ulp.
inline double exact_per_ms(double per_us) {
    double ms = units::per_us_to_per_ms(per_us);
    if (units::per_ms_to_per_us(ms) == per_us) return ms;
    double up = ms;
    double down = ms;
    for (int i = 0; i < 64; ++i) {
        up = std::nextafter(up, std::numeric_limits<double>::infinity());
        if (units::per_ms_to_per_us(up) == per_us) return up;
        down = std::nextafter(down, -std::numeric_limits<double>::infinity());
        if (units::per_ms_to_per_us(down) == per_us) return down;
    }
    return ms;
}

inline std::string emit_config(const SystemConfig& c) {
    using nlohmann::ordered_json;
    ordered_json doc;
    doc["onu_count"] = c.onu_count;
    doc["guard_us"] = c.guard_us;
    ordered_json service;
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ServiceTimeDist::Deterministic>) {
                service["kind"] = "deterministic";
                service["value_us"] = k.value_us;
            } else if constexpr (std::is_same_v<K, ServiceTimeDist::Exponential>) {
                service["kind"] = "exponential";
                service["mean_us"] = k.mean_us;
            } else {
                service["kind"] = "empirical";
                service["values_us"] = k.values_us;
                service["probabilities"] = k.probabilities;
            }
        },
        c.service.kind());
    doc["service"] = service;
    doc["subscribed_rate_pkts_per_ms"] = exact_per_ms(c.subscribed_rate);
    if (c.homogeneous() && !c.rates.empty()) {
        doc["rate_pkts_per_ms"] = exact_per_ms(c.rates.front());
    } else {
        std::vector<double> ms;
        for (double r : c.rates) ms.push_back(exact_per_ms(r));
        doc["rate_pkts_per_ms"] = ms;
    }
    if (c.window_limit) doc["window_limit_pkts"] = *c.window_limit;
    doc["epsilon"] = c.epsilon;
    return doc.dump(2) + "\n";
}

}  // namespace eponq::io
