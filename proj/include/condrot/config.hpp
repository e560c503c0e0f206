#ifndef CONDROT_CONFIG_HPP
#define CONDROT_CONFIG_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "keyvalue.hpp"

namespace condrot {

/// Version of the config/curve/report key schema.
inline constexpr const char* config_schema_version = "1";

enum class DeadTimeMode { non_paralyzable, paralyzable };

/// Axis that external polarizer angles are measured from. Internally angles are always from vertical.
enum class AngleReference { vertical, horizontal };

/**
 * Every knob of the simulated setup. SI units throughout: seconds, hertz,
 * radians. `polarizer_theta` is stored from the vertical axis regardless of
 * `polarizer_reference`, which only affects how angles are read and written.
 */
struct ExperimentConfig {
    double pair_rate = 1e5;
    double duration = 1.0;

    double eta_idler = 0.476;
    double eta_signal = 1.0;

    double dark_rate_idler = 0;
    double dark_rate_signal = 0;
    double background_rate_signal = 0;

    double t_fiber = 248e-9;
    double t_electronic = 0;
    double t0_internal = 148e-9;

    double pulse_rise = 2e-9;
    double pulse_flat = 100e-9;
    double pulse_tail = 2e-6;
    /// Rotation probability during the tail, constant over its length. Zero: only the flat part rotates.
    double tail_rotation_prob = 0;

    double cell_dead_time = 2e-6;
    DeadTimeMode cell_dead_time_mode = DeadTimeMode::non_paralyzable;
    double cell_fail_prob = 0;

    /// Non-paralyzable dead time of the detectors themselves; zero disables.
    double detector_dead_time_d1 = 0;
    double detector_dead_time_d2 = 0;

    double coincidence_window = 3e-9;
    /// D2-minus-D1 alignment offset; unset means the optical path difference t_fiber.
    std::optional<double> coincidence_offset;

    double polarizer_theta = 0;
    AngleReference polarizer_reference = AngleReference::vertical;
    bool cell_enabled = true;

    std::uint64_t seed = 1;

    double effective_coincidence_offset() const { return coincidence_offset.value_or(t_fiber); }

    /// Delay from a D1 click to the start of the flat part of the pulse.
    double trigger_to_flat() const { return t_electronic + t0_internal + pulse_rise; }

    /// Longest time a D1 click can precede the related D2 click or window end.
    double max_delay() const {
        return std::max(t_fiber, trigger_to_flat() + pulse_flat + pulse_tail) + std::abs(effective_coincidence_offset());
    }
};

/// Throws ConfigError on the first violated invariant.
inline void validate(const ExperimentConfig& c) {
    auto finite_nonneg = [](double x, const char* name) {
        if (!std::isfinite(x) || x < 0) {
            throw ConfigError(std::string(name) + " must be finite and >= 0");
        }
    };
    auto probability = [](double x, const char* name) {
        if (!(x >= 0 && x <= 1)) {
            throw ConfigError(std::string(name) + " must lie in [0, 1]");
        }
    };

    finite_nonneg(c.pair_rate, "pair_rate");
    finite_nonneg(c.duration, "duration");
    probability(c.eta_idler, "eta_idler");
    probability(c.eta_signal, "eta_signal");
    finite_nonneg(c.dark_rate_idler, "dark_rate_idler");
    finite_nonneg(c.dark_rate_signal, "dark_rate_signal");
    finite_nonneg(c.background_rate_signal, "background_rate_signal");
    finite_nonneg(c.t_fiber, "t_fiber");
    finite_nonneg(c.t_electronic, "t_electronic");
    finite_nonneg(c.t0_internal, "t0_internal");
    finite_nonneg(c.pulse_rise, "pulse_rise");
    finite_nonneg(c.pulse_flat, "pulse_flat");
    finite_nonneg(c.pulse_tail, "pulse_tail");
    probability(c.tail_rotation_prob, "tail_rotation_prob");
    finite_nonneg(c.cell_dead_time, "cell_dead_time");
    probability(c.cell_fail_prob, "cell_fail_prob");
    finite_nonneg(c.detector_dead_time_d1, "detector_dead_time_d1");
    finite_nonneg(c.detector_dead_time_d2, "detector_dead_time_d2");
    finite_nonneg(c.coincidence_window, "coincidence_window");
    if (c.coincidence_offset && !std::isfinite(*c.coincidence_offset)) {
        throw ConfigError("coincidence_offset must be finite");
    }
    if (!std::isfinite(c.polarizer_theta)) {
        throw ConfigError("polarizer_theta must be finite");
    }
    if (c.pulse_rise + c.pulse_flat > c.cell_dead_time) {
        throw ConfigError("pulse_rise + pulse_flat must not exceed cell_dead_time");
    }
}

/// Offset added to an external angle to obtain the internal from-vertical angle.
inline double reference_offset(AngleReference ref) {
    return ref == AngleReference::horizontal ? std::numbers::pi / 2 : 0.0;
}

inline double to_internal_angle(double external, AngleReference ref) { return external + reference_offset(ref); }
inline double to_external_angle(double internal, AngleReference ref) { return internal - reference_offset(ref); }

/**
 * Reads the ExperimentConfig keys out of `kv`, leaving other keys in place.
 * Missing keys keep their defaults.
 */
inline ExperimentConfig read_config(KeyValueFile& kv) {
    ExperimentConfig c;
    auto num = [&](const char* key, double& field, Quantity q) {
        if (auto v = kv.take(key)) {
            field = parse_quantity(*v, q, key);
        }
    };

    num("pair_rate", c.pair_rate, Quantity::rate);
    num("duration", c.duration, Quantity::time);
    num("eta_idler", c.eta_idler, Quantity::dimensionless);
    num("eta_signal", c.eta_signal, Quantity::dimensionless);
    num("dark_rate_idler", c.dark_rate_idler, Quantity::rate);
    num("dark_rate_signal", c.dark_rate_signal, Quantity::rate);
    num("background_rate_signal", c.background_rate_signal, Quantity::rate);
    num("t_fiber", c.t_fiber, Quantity::time);
    num("t_electronic", c.t_electronic, Quantity::time);
    num("t0_internal", c.t0_internal, Quantity::time);
    num("pulse_rise", c.pulse_rise, Quantity::time);
    num("pulse_flat", c.pulse_flat, Quantity::time);
    num("pulse_tail", c.pulse_tail, Quantity::time);
    num("tail_rotation_prob", c.tail_rotation_prob, Quantity::dimensionless);
    num("cell_dead_time", c.cell_dead_time, Quantity::time);
    num("cell_fail_prob", c.cell_fail_prob, Quantity::dimensionless);
    num("detector_dead_time_d1", c.detector_dead_time_d1, Quantity::time);
    num("detector_dead_time_d2", c.detector_dead_time_d2, Quantity::time);
    num("coincidence_window", c.coincidence_window, Quantity::time);

    if (auto v = kv.take("cell_dead_time_mode")) {
        if (*v == "non-paralyzable") {
            c.cell_dead_time_mode = DeadTimeMode::non_paralyzable;
        } else if (*v == "paralyzable") {
            c.cell_dead_time_mode = DeadTimeMode::paralyzable;
        } else {
            throw ConfigError("cell_dead_time_mode must be 'non-paralyzable' or 'paralyzable'");
        }
    }
    if (auto v = kv.take("coincidence_offset")) {
        if (*v != "auto") {
            c.coincidence_offset = parse_quantity(*v, Quantity::time, "coincidence_offset");
        }
    }
    if (auto v = kv.take("polarizer_reference")) {
        if (*v == "vertical") {
            c.polarizer_reference = AngleReference::vertical;
        } else if (*v == "horizontal") {
            c.polarizer_reference = AngleReference::horizontal;
        } else {
            throw ConfigError("polarizer_reference must be 'vertical' or 'horizontal'");
        }
    }
    if (auto v = kv.take("polarizer_theta")) {
        c.polarizer_theta = to_internal_angle(parse_quantity(*v, Quantity::angle, "polarizer_theta"), c.polarizer_reference);
    } else {
        c.polarizer_theta = to_internal_angle(0, c.polarizer_reference);
    }
    if (auto v = kv.take("idler_polarizer")) {
        if (*v != "V") {
            throw ConfigError("idler_polarizer is fixed to V");
        }
    }
    if (auto v = kv.take("cell_enabled")) {
        c.cell_enabled = parse_bool(*v, "cell_enabled");
    }
    if (auto v = kv.take("seed")) {
        std::uint64_t seed = 0;
        auto res = std::from_chars(v->data(), v->data() + v->size(), seed);
        if (res.ec != std::errc() || res.ptr != v->data() + v->size()) {
            throw ConfigError("seed must be a non-negative 64-bit integer");
        }
        c.seed = seed;
    }
    return c;
}

inline ExperimentConfig parse_config(std::string_view text) {
    auto kv = KeyValueFile::parse(text);
    auto c = read_config(kv);
    kv.require_consumed();
    validate(c);
    return c;
}

/// Key-value rendering that `parse_config` reads back to an identical config.
inline std::string format_config(const ExperimentConfig& c, std::string_view line_prefix = "") {
    std::ostringstream out;
    auto line = [&](const char* key, const std::string& value) {
        out << line_prefix << key << " = " << value << '\n';
    };
    auto num = [&](const char* key, double v) { line(key, format_number(v)); };

    num("pair_rate", c.pair_rate);
    num("duration", c.duration);
    num("eta_idler", c.eta_idler);
    num("eta_signal", c.eta_signal);
    num("dark_rate_idler", c.dark_rate_idler);
    num("dark_rate_signal", c.dark_rate_signal);
    num("background_rate_signal", c.background_rate_signal);
    num("t_fiber", c.t_fiber);
    num("t_electronic", c.t_electronic);
    num("t0_internal", c.t0_internal);
    num("pulse_rise", c.pulse_rise);
    num("pulse_flat", c.pulse_flat);
    num("pulse_tail", c.pulse_tail);
    num("tail_rotation_prob", c.tail_rotation_prob);
    num("cell_dead_time", c.cell_dead_time);
    line("cell_dead_time_mode", c.cell_dead_time_mode == DeadTimeMode::paralyzable ? "paralyzable" : "non-paralyzable");
    num("cell_fail_prob", c.cell_fail_prob);
    num("detector_dead_time_d1", c.detector_dead_time_d1);
    num("detector_dead_time_d2", c.detector_dead_time_d2);
    num("coincidence_window", c.coincidence_window);
    line("coincidence_offset", c.coincidence_offset ? format_number(*c.coincidence_offset) : "auto");
    line("polarizer_reference", c.polarizer_reference == AngleReference::horizontal ? "horizontal" : "vertical");
    num("polarizer_theta", to_external_angle(c.polarizer_theta, c.polarizer_reference));
    line("idler_polarizer", "V");
    line("cell_enabled", c.cell_enabled ? "true" : "false");
    line("seed", std::to_string(c.seed));
    return out.str();
}

}

#endif
