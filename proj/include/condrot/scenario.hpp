#ifndef CONDROT_SCENARIO_HPP
#define CONDROT_SCENARIO_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "keyvalue.hpp"
#include "polarization.hpp"
#include "simulation.hpp"
#include "statistics.hpp"

/**
 * @file scenario.hpp
 * @brief Scenario files, curve/report formats, and the canned experiment drivers.
 *
 * A scenario file is an ExperimentConfig file plus these keys:
 *
 *     scenario            polarizer-scan | delay-scan | calibrate | property-oracle
 *     sweep.thetas        comma list of angles (in the polarizer_reference frame)
 *     sweep.theta_count   N uniform angles on [0, pi) instead of an explicit list
 *     sweep.delays        comma list of electronic delays
 *     scan.theta          polarizer angle held during a delay scan
 *     edge.tolerance      bisection bracket width for the delay-scan edge
 *     calibration.background_fraction[_sigma]   auto | value
 *     calibration.cell_failure_prob[_sigma]     auto | value
 *     oracle.samples      pairs per angle for the sampling oracle
 *     oracle.thetas       angles for the sampling oracle
 *
 * Curve files are CSV with a `#` header carrying the schema version, the
 * scenario kind and a full config echo. Reports are `key = value` text.
 * Every number is written with 17 significant digits.
 */

namespace condrot {

enum class ScenarioKind { polarizer_scan, delay_scan, calibrate, property_oracle };

inline const char* to_string(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::polarizer_scan: return "polarizer-scan";
    case ScenarioKind::delay_scan: return "delay-scan";
    case ScenarioKind::calibrate: return "calibrate";
    case ScenarioKind::property_oracle: return "property-oracle";
    }
    return "?";
}

inline ScenarioKind parse_scenario_kind(std::string_view s) {
    if (s == "polarizer-scan") return ScenarioKind::polarizer_scan;
    if (s == "delay-scan") return ScenarioKind::delay_scan;
    if (s == "calibrate") return ScenarioKind::calibrate;
    if (s == "property-oracle") return ScenarioKind::property_oracle;
    throw ConfigError("unknown scenario kind '" + std::string(s) + "'");
}

struct Scenario {
    ScenarioKind kind = ScenarioKind::polarizer_scan;
    ExperimentConfig config;
    /// Polarizer angles in the external (polarizer_reference) frame, radians.
    std::vector<double> thetas;
    std::vector<double> delays;
    /// Held angle for delay scans, external frame; unset uses config.polarizer_theta.
    std::optional<double> delay_theta;
    double edge_tolerance = 0.5e-9;
    /// Unset means derived from the config.
    std::optional<double> background_fraction;
    double background_fraction_sigma = 0;
    std::optional<double> cell_failure_prob;
    double cell_failure_prob_sigma = 0;
    std::uint64_t oracle_samples = 100000;
    std::vector<double> oracle_thetas;
};

inline std::vector<double> default_thetas(std::size_t n = 13) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return out;
}

inline std::vector<double> default_delays() {
    std::vector<double> out;
    for (int i = 0; i <= 20; ++i) {
        out.push_back(10e-9 * i);
    }
    return out;
}

/**
 * Reads a scenario from text. `kind_override` replaces (or supplies) the
 * `scenario` key, as the `simulate <kind>` subcommands do.
 */
inline Scenario parse_scenario(std::string_view text, std::optional<ScenarioKind> kind_override = std::nullopt) {
    auto kv = KeyValueFile::parse(text);
    Scenario s;
    auto kind = kv.take("scenario");
    if (kind_override) {
        s.kind = *kind_override;
    } else if (kind) {
        s.kind = parse_scenario_kind(*kind);
    } else {
        throw ConfigError("missing 'scenario' key");
    }

    s.config = read_config(kv);

    auto count = kv.take("sweep.theta_count");
    auto list = kv.take("sweep.thetas");
    if (count && list) {
        throw ConfigError("give either sweep.thetas or sweep.theta_count, not both");
    }
    if (list) {
        s.thetas = parse_quantity_list(*list, Quantity::angle, "sweep.thetas");
    } else if (count) {
        double n = parse_quantity(*count, Quantity::dimensionless, "sweep.theta_count");
        if (n < 1 || n != std::floor(n)) {
            throw ConfigError("sweep.theta_count must be a positive integer");
        }
        s.thetas = default_thetas(static_cast<std::size_t>(n));
    } else {
        s.thetas = default_thetas();
    }

    if (auto v = kv.take("sweep.delays")) {
        s.delays = parse_quantity_list(*v, Quantity::time, "sweep.delays");
    } else {
        s.delays = default_delays();
    }
    if (auto v = kv.take("scan.theta")) {
        s.delay_theta = parse_quantity(*v, Quantity::angle, "scan.theta");
    }
    if (auto v = kv.take("edge.tolerance")) {
        s.edge_tolerance = parse_quantity(*v, Quantity::time, "edge.tolerance");
        if (!(s.edge_tolerance > 0)) {
            throw ConfigError("edge.tolerance must be positive");
        }
    }

    auto optional_number = [&](const char* key, std::optional<double>& field) {
        if (auto v = kv.take(key)) {
            if (*v != "auto") {
                field = parse_quantity(*v, Quantity::dimensionless, key);
            }
        }
    };
    auto number = [&](const char* key, double& field) {
        if (auto v = kv.take(key)) {
            field = parse_quantity(*v, Quantity::dimensionless, key);
        }
    };
    optional_number("calibration.background_fraction", s.background_fraction);
    number("calibration.background_fraction_sigma", s.background_fraction_sigma);
    optional_number("calibration.cell_failure_prob", s.cell_failure_prob);
    number("calibration.cell_failure_prob_sigma", s.cell_failure_prob_sigma);

    if (auto v = kv.take("oracle.samples")) {
        double n = parse_quantity(*v, Quantity::dimensionless, "oracle.samples");
        if (n < 1 || n != std::floor(n)) {
            throw ConfigError("oracle.samples must be a positive integer");
        }
        s.oracle_samples = static_cast<std::uint64_t>(n);
    }
    if (auto v = kv.take("oracle.thetas")) {
        s.oracle_thetas = parse_quantity_list(*v, Quantity::angle, "oracle.thetas");
    } else {
        double deg = std::numbers::pi / 180;
        s.oracle_thetas = {0, 30 * deg, 45 * deg, 90 * deg};
    }

    kv.require_consumed();
    validate(s.config);
    if (s.thetas.empty() || s.delays.empty()) {
        throw ConfigError("sweep must not be empty");
    }
    return s;
}

inline Scenario load_scenario(const std::string& path, std::optional<ScenarioKind> kind_override = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), kind_override);
}

/// Noise share of the mean D2 rate implied by the config: (bg/2 + dark) / (bg/2 + dark + pairs eta_s / 2).
inline double expected_background_fraction(const ExperimentConfig& c) {
    double noise = 0.5 * c.background_rate_signal + c.dark_rate_signal;
    double signal = 0.5 * c.pair_rate * c.eta_signal;
    return noise + signal > 0 ? noise / (noise + signal) : 0.0;
}

// ---------------------------------------------------------------------------
// Curve files

struct CurveRow {
    double x = 0;
    double rate_d2 = 0;
    double sigma_d2 = 0;
    double coincidence_rate = 0;
    double sigma_coincidence = 0;
};

struct CurveFile {
    std::string kind;
    std::vector<CurveRow> rows;
    /// `config.key = value` lines from the header, newline-terminated.
    std::string config_echo;

    std::vector<CurvePoint> singles() const {
        std::vector<CurvePoint> out;
        for (const auto& r : rows) {
            out.push_back({r.x, r.rate_d2, r.sigma_d2});
        }
        return out;
    }

    std::vector<CurvePoint> coincidences() const {
        std::vector<CurvePoint> out;
        for (const auto& r : rows) {
            out.push_back({r.x, r.coincidence_rate, r.sigma_coincidence});
        }
        return out;
    }
};

inline constexpr const char* curve_columns = "theta_or_delay,rate_d2,sigma_d2,coincidence_rate,sigma_coincidence";

inline std::string format_curve(ScenarioKind kind, const ExperimentConfig& config, const std::vector<CurveRow>& rows) {
    std::ostringstream out;
    out << "# condrot curve\n";
    out << "# schema = " << config_schema_version << '\n';
    out << "# kind = " << to_string(kind) << '\n';
    out << "# x_unit = " << (kind == ScenarioKind::delay_scan ? "s" : "rad") << '\n';
    out << format_config(config, "# config.");
    out << curve_columns << '\n';
    for (const auto& r : rows) {
        out << format_number(r.x) << ',' << format_number(r.rate_d2) << ',' << format_number(r.sigma_d2) << ','
            << format_number(r.coincidence_rate) << ',' << format_number(r.sigma_coincidence) << '\n';
    }
    return out.str();
}

inline CurveFile parse_curve(std::string_view text) {
    CurveFile out;
    bool header_seen = false;
    std::size_t pos = 0, lineno = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = detail::trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            auto body = detail::trim(line.substr(1));
            if (body.starts_with("config.")) {
                out.config_echo.append(body).push_back('\n');
            } else if (body.starts_with("kind")) {
                auto eq = body.find('=');
                if (eq != std::string_view::npos) {
                    out.kind = std::string(detail::trim(body.substr(eq + 1)));
                }
            }
            continue;
        }
        if (!header_seen) {
            if (line != curve_columns) {
                throw ConfigError("curve file: unexpected column header at line " + std::to_string(lineno));
            }
            header_seen = true;
            continue;
        }
        auto cols = parse_quantity_list(line, Quantity::dimensionless, "curve row");
        if (cols.size() != 5) {
            throw ConfigError("curve file: expected 5 columns at line " + std::to_string(lineno));
        }
        out.rows.push_back({cols[0], cols[1], cols[2], cols[3], cols[4]});
    }
    if (!header_seen) {
        throw ConfigError("curve file: missing column header");
    }
    return out;
}

inline CurveFile load_curve(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_curve(buf.str());
}

// ---------------------------------------------------------------------------
// Reports

class ReportWriter {
public:
    void comment(const std::string& text) { out_ << "# " << text << '\n'; }
    void put(const std::string& key, const std::string& value) { out_ << key << " = " << value << '\n'; }
    void put(const std::string& key, double value) { put(key, format_number(value)); }
    void put_count(const std::string& key, std::uint64_t value) { put(key, std::to_string(value)); }
    void put_bool(const std::string& key, bool value) { put(key, value ? "true" : "false"); }
    void put(const std::string& key, Measurement m) {
        put(key + ".value", m.value);
        put(key + ".sigma", m.sigma);
    }
    void raw(const std::string& text) { out_ << text; }

    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

inline void write_fit(ReportWriter& w, const std::string& prefix, const CurveFit& fit) {
    w.put(prefix + ".mean_a", Measurement{fit.mean_a, fit.sigma_a()});
    w.put(prefix + ".visibility_v", Measurement{fit.visibility_v, fit.sigma_v()});
    w.put(prefix + ".phase_theta0", Measurement{fit.phase_theta0, fit.sigma_theta0()});
    w.put(prefix + ".chi2_reduced", fit.chi2_reduced);
    w.put_count(prefix + ".points", fit.points);
    const char* names[3] = {"a", "v", "theta0"};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            w.put(prefix + ".covariance." + names[i] + "_" + names[j], fit.covariance(i, j));
        }
    }
}

/// Fit of both curves of a file; the coincidence fit may legitimately fail (no coincidences).
inline std::string format_fit_report(const CurveFile& curve) {
    ReportWriter w;
    w.comment("condrot fit report");
    w.put("schema", config_schema_version);
    w.put("kind", "fit");
    w.put("curve.kind", curve.kind.empty() ? "unknown" : curve.kind);
    w.raw(curve.config_echo);
    write_fit(w, "fit.singles", fit_visibility(curve.singles()));
    try {
        write_fit(w, "fit.coincidence", fit_visibility(curve.coincidences()));
    } catch (const FitError& e) {
        w.put("fit.coincidence.error", e.what());
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// Drivers

struct ScenarioOutput {
    ScenarioKind kind = ScenarioKind::polarizer_scan;
    /// Empty when the scenario has no curve.
    std::string curve_csv;
    std::string report;

    std::vector<ScanPoint> scan;
    std::vector<CurveRow> rows;
    std::optional<CurveFit> singles_fit;
    std::optional<CurveFit> coincidence_fit;
    std::optional<DelayEdge> edge;
    std::optional<CalibrationReport> calibration;
    bool oracle_passed = true;
};

inline std::vector<CurveRow> rows_from_scan(const std::vector<ScanPoint>& scan, bool angles, AngleReference ref) {
    std::vector<CurveRow> rows;
    for (const auto& p : scan) {
        rows.push_back({angles ? to_external_angle(p.x, ref) : p.x, p.singles_rate, p.singles_sigma,
                        p.coincidence_rate, p.coincidence_sigma});
    }
    return rows;
}

inline std::vector<PolarizerAngle> internal_angles(const std::vector<double>& external, AngleReference ref) {
    std::vector<PolarizerAngle> out;
    for (double t : external) {
        out.push_back(PolarizerAngle::from_radians(to_internal_angle(t, ref)));
    }
    return out;
}

inline void write_run(ReportWriter& w, const std::string& prefix, const SimulationResult& r) {
    w.put_count(prefix + ".singles_d1", r.singles_d1);
    w.put_count(prefix + ".singles_d2", r.singles_d2);
    w.put_count(prefix + ".coincidences", r.coincidences);
    w.put(prefix + ".rotated_fraction", r.rotated_fraction);
    w.put_count(prefix + ".pairs_emitted", r.diagnostics.pairs_emitted);
    w.put_count(prefix + ".triggers_accepted", r.diagnostics.triggers_accepted);
    w.put_count(prefix + ".triggers_busy", r.diagnostics.triggers_busy);
    w.put_count(prefix + ".triggers_failed", r.diagnostics.triggers_failed);
    w.put_count(prefix + ".seed", r.seed);
}

inline void report_header(ReportWriter& w, const Scenario& s) {
    w.comment("condrot report");
    w.put("schema", config_schema_version);
    w.put("kind", to_string(s.kind));
    w.raw(format_config(s.config, "config."));
}

/// Result of the cell-off, horizontal-selection run used for the Klyshko estimate.
struct KlyshkoRun {
    SimulationResult run;
    /// Same settings with pair_rate = 0: the dark and background floor of D2.
    SimulationResult blocked;
    double accidentals = 0;
    Measurement eta;
};

/**
 * Standard two-detector calibration: cell off, signal polarizer on H so that
 * every transmitted signal photon has a vertical twin headed for D1. A
 * second run with the source blocked gives the D2 floor to subtract.
 */
inline KlyshkoRun run_klyshko(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.cell_enabled = false;
    c.polarizer_theta = PolarizerAngle::horizontal().radians();
    c.seed = derive_seed(config.seed, 0x4b4c5953484b4fULL);
    KlyshkoRun out;
    out.run = simulate_run(c);
    out.accidentals = out.run.duration > 0
        ? accidental_coincidences(out.run.singles_d1, out.run.singles_d2, c.coincidence_window, out.run.duration)
        : 0.0;
    ExperimentConfig b = c;
    b.pair_rate = 0;
    b.seed = derive_seed(c.seed, 1);
    out.blocked = simulate_run(b);
    out.eta = klyshko_efficiency(counted(out.run.coincidences), blocked_subtracted(out.run.singles_d2, out.blocked.singles_d2),
                                 {out.accidentals, std::sqrt(out.accidentals)});
    return out;
}

inline VisibilityCorrections scenario_corrections(const Scenario& s) {
    VisibilityCorrections corr;
    corr.background_fraction = {s.background_fraction.value_or(expected_background_fraction(s.config)), s.background_fraction_sigma};
    corr.cell_failure_prob = {s.cell_failure_prob.value_or(s.config.cell_fail_prob), s.cell_failure_prob_sigma};
    return corr;
}

inline ScenarioOutput run_polarizer_scan(const Scenario& s, ScanOptions options = {}) {
    ScenarioOutput out;
    out.kind = s.kind;
    auto angles = internal_angles(s.thetas, s.config.polarizer_reference);
    out.scan = polarizer_scan(s.config, angles, options);
    out.rows = rows_from_scan(out.scan, true, s.config.polarizer_reference);
    out.curve_csv = format_curve(s.kind, s.config, out.rows);

    CurveFile curve{to_string(s.kind), out.rows, {}};
    ReportWriter w;
    report_header(w, s);
    out.singles_fit = fit_visibility(curve.singles());
    write_fit(w, "fit.singles", *out.singles_fit);
    try {
        out.coincidence_fit = fit_visibility(curve.coincidences());
        write_fit(w, "fit.coincidence", *out.coincidence_fit);
    } catch (const FitError& e) {
        w.put("fit.coincidence.error", e.what());
    }
    for (std::size_t i = 0; i < out.scan.size(); ++i) {
        write_run(w, "point." + std::to_string(i), out.scan[i].run);
    }
    out.report = w.str();
    return out;
}

inline ScenarioOutput run_delay_scan(const Scenario& s, ScanOptions options = {}) {
    ScenarioOutput out;
    out.kind = s.kind;
    double theta_ext = s.delay_theta.value_or(to_external_angle(s.config.polarizer_theta, s.config.polarizer_reference));
    auto theta = PolarizerAngle::from_radians(to_internal_angle(theta_ext, s.config.polarizer_reference));
    out.scan = delay_scan(s.config, s.delays, theta, options);
    out.rows = rows_from_scan(out.scan, false, s.config.polarizer_reference);
    out.curve_csv = format_curve(s.kind, s.config, out.rows);

    ReportWriter w;
    report_header(w, s);
    w.put("scan.theta", theta_ext);
    ExperimentConfig held = s.config;
    held.polarizer_theta = theta.radians();
    try {
        out.edge = locate_delay_edge(held, out.scan, s.edge_tolerance);
        w.put_bool("edge.found", true);
        w.put("edge.delay", out.edge->delay);
        w.put("edge.bracket_lo", out.edge->lo);
        w.put("edge.bracket_hi", out.edge->hi);
        w.put_count("edge.refinements", static_cast<std::uint64_t>(out.edge->refinements));
    } catch (const DataError&) {
        w.put_bool("edge.found", false);
    }
    for (std::size_t i = 0; i < out.scan.size(); ++i) {
        w.put("point." + std::to_string(i) + ".delay", out.scan[i].x);
        write_run(w, "point." + std::to_string(i), out.scan[i].run);
    }
    out.report = w.str();
    return out;
}

inline void write_calibration(ReportWriter& w, const CalibrationReport& rep) {
    write_fit(w, "fit.singles", rep.singles_fit);
    w.put("calibration.background_fraction", rep.corrections.background_fraction);
    w.put("calibration.cell_failure_prob", rep.corrections.cell_failure_prob);
    w.put("calibration.v_raw", rep.v_raw);
    w.put("calibration.v_background_corrected", rep.v_background_corrected);
    w.put("calibration.v_cell_corrected", rep.v_cell_corrected);
    w.put("calibration.eta_from_visibility", rep.eta_from_visibility);
    w.put("calibration.eta_from_visibility.sigma_statistical", rep.eta_visibility_sigma_statistical);
    w.put("calibration.eta_from_visibility.sigma_corrections", rep.eta_visibility_sigma_corrections);
    w.put("calibration.eta_klyshko", rep.eta_klyshko);
    w.put_count("calibration.klyshko.coincidences", rep.klyshko_coincidences);
    w.put_count("calibration.klyshko.singles_d2", rep.klyshko_singles_other);
    w.put_count("calibration.klyshko.singles_d2_blocked", rep.klyshko_singles_blocked);
    w.put("calibration.klyshko.accidentals", rep.klyshko_accidentals);
    w.put("calibration.agreement_sigmas", rep.agreement_sigmas());
}

/**
 * Visibility route and Klyshko route to the trigger efficiency. With
 * `curve` given, the singles fit comes from that file instead of a fresh scan.
 */
inline ScenarioOutput run_calibrate(const Scenario& s, const CurveFile* curve = nullptr, ScanOptions options = {}) {
    ScenarioOutput out;
    out.kind = s.kind;
    CurveFit fit;
    if (curve) {
        fit = fit_visibility(curve->singles());
    } else {
        auto angles = internal_angles(s.thetas, s.config.polarizer_reference);
        out.scan = polarizer_scan(s.config, angles, options);
        out.rows = rows_from_scan(out.scan, true, s.config.polarizer_reference);
        out.curve_csv = format_curve(s.kind, s.config, out.rows);
        fit = fit_visibility(CurveFile{to_string(s.kind), out.rows, {}}.singles());
    }
    out.singles_fit = fit;

    auto klyshko = run_klyshko(s.config);
    out.calibration = build_calibration_report(fit, scenario_corrections(s), klyshko.run.coincidences,
                                               klyshko.run.singles_d2, klyshko.accidentals, klyshko.blocked.singles_d2);

    ReportWriter w;
    report_header(w, s);
    w.put("calibration.singles_source", curve ? "curve-file" : "simulation");
    write_calibration(w, *out.calibration);
    write_run(w, "klyshko_run", klyshko.run);
    out.report = w.str();
    return out;
}

/// Sampling-soundness and purification-law checks, reported per angle.
inline ScenarioOutput run_property_oracle(const Scenario& s) {
    ScenarioOutput out;
    out.kind = s.kind;
    ReportWriter w;
    report_header(w, s);

    const auto pair = make_mixed_biphoton();
    const auto vert = PolarizerAngle::vertical();
    const auto horiz = PolarizerAngle::horizontal();
    bool ok = true;
    for (std::size_t i = 0; i < s.oracle_thetas.size(); ++i) {
        auto theta = PolarizerAngle::from_radians(to_internal_angle(s.oracle_thetas[i], s.config.polarizer_reference));
        auto theta_perp = PolarizerAngle::from_radians(theta.radians() + std::numbers::pi / 2);
        // Index = 2 * idler_passes + signal_passes.
        std::array<double, 4> probs = {
            joint_pass_probability(pair, theta_perp, horiz),
            joint_pass_probability(pair, theta, horiz),
            joint_pass_probability(pair, theta_perp, vert),
            joint_pass_probability(pair, theta, vert),
        };
        Rng rng(derive_seed(s.config.seed, i));
        auto counts = sample_joint_outcomes(theta, s.oracle_samples, rng);
        auto chi = chi_square_gof(counts, probs);
        std::string p = "oracle.theta." + std::to_string(i);
        w.put(p + ".theta", s.oracle_thetas[i]);
        for (int k = 0; k < 4; ++k) {
            w.put(p + ".probability." + std::to_string(k), probs[static_cast<std::size_t>(k)]);
            w.put_count(p + ".count." + std::to_string(k), counts[static_cast<std::size_t>(k)]);
        }
        w.put(p + ".chi2", chi.statistic);
        w.put_count(p + ".dof", static_cast<std::uint64_t>(chi.dof));
        w.put(p + ".p_value", chi.p_value);
        ok = ok && chi.p_value > 0.001;
    }

    double worst = 0;
    for (int k = 0; k <= 10; ++k) {
        double eta = 0.1 * k;
        double p = degree_of_polarization(stokes_from_state(conditional_feedforward_state(eta), 1.0));
        worst = std::max(worst, std::abs(p - eta));
    }
    w.put("oracle.purification.max_abs_error", worst);
    ok = ok && worst <= 1e-12;
    w.put_bool("oracle.passed", ok);
    out.oracle_passed = ok;
    out.report = w.str();
    return out;
}

inline ScenarioOutput run_scenario(const Scenario& s, ScanOptions options = {}) {
    switch (s.kind) {
    case ScenarioKind::polarizer_scan: return run_polarizer_scan(s, options);
    case ScenarioKind::delay_scan: return run_delay_scan(s, options);
    case ScenarioKind::calibrate: return run_calibrate(s, nullptr, options);
    case ScenarioKind::property_oracle: return run_property_oracle(s);
    }
    throw ConfigError("unknown scenario kind");
}

/// Writes curve.csv (when present) and report.txt into `dir`, creating it if needed.
inline void write_outputs(const ScenarioOutput& out, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw std::runtime_error("cannot write '" + p.string() + "'");
        }
        f << text;
    };
    if (!out.curve_csv.empty()) {
        write(dir / "curve.csv", out.curve_csv);
    }
    write(dir / "report.txt", out.report);
}

}

#endif
