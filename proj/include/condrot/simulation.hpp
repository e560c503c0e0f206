#ifndef CONDROT_SIMULATION_HPP
#define CONDROT_SIMULATION_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <span>
#include <thread>
#include <vector>

#include "config.hpp"
#include "errors.hpp"
#include "polarization.hpp"
#include "random.hpp"

/**
 * @file simulation.hpp
 * @brief Discrete-event Monte Carlo of the triggered-rotation setup.
 *
 * Pairs are emitted as a Poisson process; each pair is in a definite branch
 * HV or VH (signal polarization first). This branch sampling reproduces the
 * mixed pair state exactly because that state is diagonal in {HV, VH} and
 * the idler is only ever measured in the H/V basis. It is NOT valid for an
 * idler polarizer at any other angle.
 *
 * Timing: the idler reaches D1 at emission time. A click at t requests the
 * cell; an accepted request opens the flat rotation window
 * [t + T + T0 + rise, ... + flat) and keeps the cell busy until
 * t + T + T0 + rise + dead_time. The signal reaches the cell at
 * t_emit + t_fiber and is registered by D2 at that same time.
 */

namespace condrot {

/// Signal polarization listed first.
enum class Branch : std::uint8_t { HV, VH };

struct PairEvent {
    double t_emit;
    Branch branch;
};

enum class Detector : std::uint8_t { D1, D2 };
enum class Origin : std::uint8_t { photon, dark, background };

struct DetectionRecord {
    Detector detector;
    double t;
    Origin origin;
    /// Index of the emitting pair for photon clicks, -1 otherwise.
    std::int64_t pair = -1;
};

/// Returns the pure signal state before the cell for a branch.
inline PolarizationState signal_state(Branch b) {
    return b == Branch::HV ? PolarizationState::horizontal() : PolarizationState::vertical();
}

/// The idler passes the fixed vertical polarizer only in the HV branch.
inline bool idler_passes_vertical(Branch b) { return b == Branch::HV; }

inline Branch sample_branch(Rng& rng) { return rng.bernoulli(0.5) ? Branch::HV : Branch::VH; }

/// Homogeneous Poisson arrival times on [0, duration).
inline std::vector<double> poisson_times(double rate, double duration, Rng& rng) {
    std::vector<double> out;
    if (!(rate > 0) || !(duration > 0)) {
        return out;
    }
    out.reserve(static_cast<std::size_t>(rate * duration * 1.01 + 16));
    double t = rng.exponential(rate);
    while (t < duration) {
        out.push_back(t);
        double next = t + rng.exponential(rate);
        while (next <= t) {
            next = t + rng.exponential(rate);
        }
        t = next;
    }
    return out;
}

/// Pair emissions over [0, duration), strictly increasing in time.
inline std::vector<PairEvent> generate_pairs(const ExperimentConfig& config, Rng& rng) {
    if (!(config.pair_rate >= 0)) {
        throw ConfigError("pair_rate must be >= 0");
    }
    auto times = poisson_times(config.pair_rate, config.duration, rng);
    std::vector<PairEvent> out;
    out.reserve(times.size());
    for (double t : times) {
        out.push_back({t, sample_branch(rng)});
    }
    return out;
}

/**
 * Pockels-cell state: accepted rotation windows in time order.
 * Requests must arrive in non-decreasing time order.
 */
class CellTimeline {
public:
    struct Window {
        double start;
        double end;
    };

    enum class Outcome { accepted, busy, failed };

    CellTimeline(const ExperimentConfig& config)
        : delay_(config.trigger_to_flat()),
          flat_(config.pulse_flat),
          tail_(config.pulse_tail),
          dead_time_(config.cell_dead_time),
          mode_(config.cell_dead_time_mode),
          fail_prob_(config.cell_fail_prob) {}

    Outcome request(double t_click, Rng& rng) {
        if (t_click < busy_until_) {
            if (mode_ == DeadTimeMode::paralyzable) {
                busy_until_ = std::max(busy_until_, t_click + delay_ + dead_time_);
            }
            return Outcome::busy;
        }
        if (rng.uniform() < fail_prob_) {
            return Outcome::failed;
        }
        double start = t_click + delay_;
        windows_.push_back({start, start + flat_});
        accepted_.push_back(t_click);
        busy_until_ = t_click + delay_ + dead_time_;
        return Outcome::accepted;
    }

    /// Whether the flat part of some pulse covers t.
    bool in_flat(double t) const {
        const Window* w = latest_started(t);
        return w && t < w->end;
    }

    /// Whether t falls in the tail following the most recent flat part.
    bool in_tail(double t) const {
        const Window* w = latest_started(t);
        return w && t >= w->end && t < w->end + tail_;
    }

    const std::vector<Window>& active_windows() const { return windows_; }
    const std::vector<double>& accepted_triggers() const { return accepted_; }
    double busy_until() const { return busy_until_; }

    /// Windows ordered and disjoint, accepted triggers at least one dead time apart.
    bool invariants_hold() const {
        for (std::size_t i = 1; i < windows_.size(); ++i) {
            if (windows_[i].start < windows_[i - 1].end) {
                return false;
            }
            if (accepted_[i] - accepted_[i - 1] < dead_time_) {
                return false;
            }
        }
        return true;
    }

private:
    const Window* latest_started(double t) const {
        auto it = std::upper_bound(windows_.begin(), windows_.end(), t,
                                   [](double x, const Window& w) { return x < w.start; });
        if (it == windows_.begin()) {
            return nullptr;
        }
        return &*std::prev(it);
    }

    double delay_;
    double flat_;
    double tail_;
    double dead_time_;
    DeadTimeMode mode_;
    double fail_prob_;
    double busy_until_ = -std::numeric_limits<double>::infinity();
    std::vector<Window> windows_;
    std::vector<double> accepted_;
};

/**
 * Greedy earliest-first one-to-one matching: a D1 click at t1 and a D2
 * click at t2 coincide iff |t2 - (t1 + offset)| <= window / 2.
 */
inline std::uint64_t coincidence_match(std::span<const double> d1, std::span<const double> d2, double window, double offset) {
    if (!std::is_sorted(d1.begin(), d1.end()) || !std::is_sorted(d2.begin(), d2.end())) {
        throw InputError("coincidence_match: click lists must be time-sorted");
    }
    if (!(window >= 0) || !std::isfinite(offset)) {
        throw InputError("coincidence_match: window must be >= 0 and offset finite");
    }
    double half = window / 2;
    std::uint64_t count = 0;
    std::size_t i = 0, j = 0;
    while (i < d1.size() && j < d2.size()) {
        double delta = d2[j] - (d1[i] + offset);
        if (delta < -half) {
            ++j;
        } else if (delta > half) {
            ++i;
        } else {
            ++count;
            ++i;
            ++j;
        }
    }
    return count;
}

/// Counters collected along a run, beyond the headline observables.
struct RunDiagnostics {
    std::uint64_t pairs_emitted = 0;
    /// Signal photons whose twin produced a D1 click.
    std::uint64_t heralded_signals = 0;
    std::uint64_t rotated_heralded = 0;
    /// Signal photons rotated although their twin did not click.
    std::uint64_t rotated_unheralded = 0;
    std::uint64_t d1_photon = 0;
    std::uint64_t d1_dark = 0;
    std::uint64_t d2_photon = 0;
    std::uint64_t d2_dark = 0;
    std::uint64_t d2_background = 0;
    std::uint64_t triggers_requested = 0;
    std::uint64_t triggers_accepted = 0;
    std::uint64_t triggers_busy = 0;
    std::uint64_t triggers_failed = 0;
};

struct SimulationResult {
    std::uint64_t singles_d1 = 0;
    std::uint64_t singles_d2 = 0;
    std::uint64_t coincidences = 0;
    /// Fraction of heralded signal photons that were rotated.
    double rotated_fraction = 0;
    double duration = 0;
    ExperimentConfig config;
    std::uint64_t seed = 0;
    RunDiagnostics diagnostics;
};

/// Optional full record of a run, for inspection and tests.
struct SimulationTrace {
    std::vector<DetectionRecord> d1;
    std::vector<DetectionRecord> d2;
    std::vector<CellTimeline::Window> windows;
    std::vector<double> accepted_triggers;
};

namespace detail {

/// Drops clicks within `dead` of the last kept click (non-paralyzable detector).
inline void apply_detector_dead_time(std::vector<DetectionRecord>& clicks, double dead) {
    if (!(dead > 0) || clicks.empty()) {
        return;
    }
    std::size_t kept = 1;
    double last = clicks[0].t;
    for (std::size_t i = 1; i < clicks.size(); ++i) {
        if (clicks[i].t - last >= dead) {
            last = clicks[i].t;
            clicks[kept++] = clicks[i];
        }
    }
    clicks.resize(kept);
}

inline bool earlier(const DetectionRecord& a, const DetectionRecord& b) { return a.t < b.t; }

/// Sub-stream indices of a run's master seed.
enum Stream : std::uint64_t { pairs = 0, idler = 1, idler_dark = 2, cell = 3, signal = 4, signal_dark = 5, background = 6 };

}

/**
 * Runs one acquisition of `config.duration` seconds. Identical config
 * (including seed) gives a bit-identical result.
 */
inline SimulationResult simulate_run(const ExperimentConfig& config, SimulationTrace* trace = nullptr) {
    validate(config);

    auto stream = [&](detail::Stream s) { return Rng(derive_seed(config.seed, s)); };
    Rng pair_rng = stream(detail::pairs);
    Rng idler_rng = stream(detail::idler);
    Rng idler_dark_rng = stream(detail::idler_dark);
    Rng cell_rng = stream(detail::cell);
    Rng signal_rng = stream(detail::signal);
    Rng signal_dark_rng = stream(detail::signal_dark);
    Rng background_rng = stream(detail::background);

    SimulationResult result;
    result.config = config;
    result.seed = config.seed;
    result.duration = config.duration;
    RunDiagnostics& diag = result.diagnostics;

    const auto pairs = generate_pairs(config, pair_rng);
    diag.pairs_emitted = pairs.size();

    // Idler arm.
    std::vector<DetectionRecord> d1;
    {
        std::vector<DetectionRecord> photon;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (idler_passes_vertical(pairs[k].branch) && idler_rng.bernoulli(config.eta_idler)) {
                photon.push_back({Detector::D1, pairs[k].t_emit, Origin::photon, static_cast<std::int64_t>(k)});
            }
        }
        std::vector<DetectionRecord> dark;
        for (double t : poisson_times(config.dark_rate_idler, config.duration, idler_dark_rng)) {
            dark.push_back({Detector::D1, t, Origin::dark});
        }
        d1.resize(photon.size() + dark.size());
        std::merge(photon.begin(), photon.end(), dark.begin(), dark.end(), d1.begin(), detail::earlier);
        detail::apply_detector_dead_time(d1, config.detector_dead_time_d1);
    }

    // Trigger chain. Every D1 click, dark or not, requests the cell.
    CellTimeline cell(config);
    std::vector<char> heralded(pairs.size(), 0);
    for (const auto& click : d1) {
        if (click.origin == Origin::photon) {
            heralded[static_cast<std::size_t>(click.pair)] = 1;
            ++diag.d1_photon;
        } else {
            ++diag.d1_dark;
        }
        ++diag.triggers_requested;
        switch (cell.request(click.t, cell_rng)) {
        case CellTimeline::Outcome::accepted: ++diag.triggers_accepted; break;
        case CellTimeline::Outcome::busy: ++diag.triggers_busy; break;
        case CellTimeline::Outcome::failed: ++diag.triggers_failed; break;
        }
    }

    // Signal arm.
    const PolarizerAngle theta = PolarizerAngle::from_radians(config.polarizer_theta);
    const double pass_h = project_polarizer(PolarizationState::horizontal(), theta);
    const double pass_v = project_polarizer(PolarizationState::vertical(), theta);

    std::vector<DetectionRecord> d2;
    {
        std::vector<DetectionRecord> photon;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const double t_cell = pairs[k].t_emit + config.t_fiber;
            bool vertical = pairs[k].branch == Branch::VH;
            bool rotated = false;
            if (config.cell_enabled) {
                if (cell.in_flat(t_cell)) {
                    rotated = true;
                } else if (config.tail_rotation_prob > 0 && cell.in_tail(t_cell)) {
                    rotated = signal_rng.bernoulli(config.tail_rotation_prob);
                }
            }
            if (rotated) {
                vertical = !vertical;
            }
            if (heralded[k]) {
                ++diag.heralded_signals;
                diag.rotated_heralded += rotated;
            } else {
                diag.rotated_unheralded += rotated;
            }
            bool passes = signal_rng.bernoulli(vertical ? pass_v : pass_h);
            bool detected = signal_rng.bernoulli(config.eta_signal);
            if (passes && detected) {
                photon.push_back({Detector::D2, t_cell, Origin::photon, static_cast<std::int64_t>(k)});
            }
        }

        std::vector<DetectionRecord> noise;
        for (double t : poisson_times(config.dark_rate_signal, config.duration, signal_dark_rng)) {
            noise.push_back({Detector::D2, t, Origin::dark});
        }
        std::vector<DetectionRecord> background;
        for (double t : poisson_times(config.background_rate_signal, config.duration, background_rng)) {
            // Unpolarized stray light: half of it gets through any polarizer setting.
            if (background_rng.bernoulli(0.5)) {
                background.push_back({Detector::D2, t, Origin::background});
            }
        }
        std::vector<DetectionRecord> merged(noise.size() + background.size());
        std::merge(noise.begin(), noise.end(), background.begin(), background.end(), merged.begin(), detail::earlier);
        d2.resize(photon.size() + merged.size());
        std::merge(photon.begin(), photon.end(), merged.begin(), merged.end(), d2.begin(), detail::earlier);
        detail::apply_detector_dead_time(d2, config.detector_dead_time_d2);
    }
    for (const auto& click : d2) {
        switch (click.origin) {
        case Origin::photon: ++diag.d2_photon; break;
        case Origin::dark: ++diag.d2_dark; break;
        case Origin::background: ++diag.d2_background; break;
        }
    }

    std::vector<double> t1(d1.size()), t2(d2.size());
    std::transform(d1.begin(), d1.end(), t1.begin(), [](const DetectionRecord& r) { return r.t; });
    std::transform(d2.begin(), d2.end(), t2.begin(), [](const DetectionRecord& r) { return r.t; });

    result.singles_d1 = d1.size();
    result.singles_d2 = d2.size();
    result.coincidences = coincidence_match(t1, t2, config.coincidence_window, config.effective_coincidence_offset());
    result.rotated_fraction = diag.heralded_signals > 0
        ? static_cast<double>(diag.rotated_heralded) / static_cast<double>(diag.heralded_signals)
        : 0.0;

    if (!cell.invariants_hold()) {
        throw SimulationError("cell timeline invariant violated");
    }
    if (result.coincidences > std::min(result.singles_d1, result.singles_d2)) {
        throw SimulationError("more coincidences than singles");
    }

    if (trace) {
        trace->d1 = std::move(d1);
        trace->d2 = std::move(d2);
        trace->windows = cell.active_windows();
        trace->accepted_triggers = cell.accepted_triggers();
    }
    return result;
}

/// One scan point: abscissa (angle in radians or delay in seconds), rates and Poisson errors.
struct ScanPoint {
    double x = 0;
    double singles_rate = 0;
    double singles_sigma = 0;
    double coincidence_rate = 0;
    double coincidence_sigma = 0;
    SimulationResult run;
};

/// Poisson error of a count rate; empty bins use sqrt(n + 1).
inline double poisson_rate_sigma(std::uint64_t counts, double duration) {
    double n = static_cast<double>(counts);
    return std::sqrt(counts > 0 ? n : n + 1) / duration;
}

inline ScanPoint make_scan_point(double x, SimulationResult run) {
    ScanPoint p;
    p.x = x;
    double d = run.duration;
    if (d > 0) {
        p.singles_rate = static_cast<double>(run.singles_d2) / d;
        p.singles_sigma = poisson_rate_sigma(run.singles_d2, d);
        p.coincidence_rate = static_cast<double>(run.coincidences) / d;
        p.coincidence_sigma = poisson_rate_sigma(run.coincidences, d);
    }
    p.run = std::move(run);
    return p;
}

struct ScanOptions {
    /// Worker threads; 0 means hardware concurrency.
    unsigned workers = 0;
};

/**
 * Runs `n` independent simulations, point i with seed derive_seed(master, i).
 * Results are stored by index, so output does not depend on scheduling.
 */
template<class MakeConfig_>
std::vector<SimulationResult> run_seeded_points(std::size_t n, std::uint64_t master, MakeConfig_ make_config, ScanOptions options = {}) {
    std::vector<ExperimentConfig> configs;
    configs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ExperimentConfig c = make_config(i);
        c.seed = derive_seed(master, i);
        validate(c);
        configs.push_back(std::move(c));
    }

    std::vector<SimulationResult> results(n);
    unsigned workers = options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&]() {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                results[i] = simulate_run(configs[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    return results;
}

/// Singles and coincidence rates versus signal polarizer angle (internal, from vertical).
inline std::vector<ScanPoint> polarizer_scan(const ExperimentConfig& config, std::span<const PolarizerAngle> thetas, ScanOptions options = {}) {
    if (thetas.empty()) {
        throw ConfigError("polarizer_scan: empty angle list");
    }
    auto runs = run_seeded_points(thetas.size(), config.seed, [&](std::size_t i) {
        ExperimentConfig c = config;
        c.polarizer_theta = thetas[i].radians();
        return c;
    }, options);
    std::vector<ScanPoint> out;
    out.reserve(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        out.push_back(make_scan_point(thetas[i].radians(), std::move(runs[i])));
    }
    return out;
}

/// Rates versus electronic trigger delay T at a fixed polarizer angle.
inline std::vector<ScanPoint> delay_scan(const ExperimentConfig& config, std::span<const double> delays, PolarizerAngle theta, ScanOptions options = {}) {
    if (delays.empty()) {
        throw ConfigError("delay_scan: empty delay list");
    }
    auto runs = run_seeded_points(delays.size(), config.seed, [&](std::size_t i) {
        ExperimentConfig c = config;
        c.t_electronic = delays[i];
        c.polarizer_theta = theta.radians();
        return c;
    }, options);
    std::vector<ScanPoint> out;
    out.reserve(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        out.push_back(make_scan_point(delays[i], std::move(runs[i])));
    }
    return out;
}

/// Uniform grid of n angles on [0, pi).
inline std::vector<PolarizerAngle> uniform_angles(std::size_t n) {
    std::vector<PolarizerAngle> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(PolarizerAngle::from_radians(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)));
    }
    return out;
}

struct DelayEdge {
    double delay;
    /// Final bracket [lo, hi] around the crossing.
    double lo;
    double hi;
    int refinements;
};

/**
 * Delay at which the rotated fraction drops through one half. The scan
 * brackets the first falling crossing; the bracket is then bisected with
 * fresh simulations until narrower than `tolerance`.
 */
inline DelayEdge locate_delay_edge(const ExperimentConfig& config, std::span<const ScanPoint> scan, double tolerance) {
    std::size_t k = 1;
    while (k < scan.size() && !(scan[k - 1].run.rotated_fraction >= 0.5 && scan[k].run.rotated_fraction < 0.5)) {
        ++k;
    }
    if (k >= scan.size()) {
        throw DataError("locate_delay_edge: scan does not cross one half");
    }
    double lo = scan[k - 1].x, hi = scan[k].x;
    int iter = 0;
    while (hi - lo > tolerance && iter < 64) {
        double mid = 0.5 * (lo + hi);
        ExperimentConfig c = config;
        c.t_electronic = mid;
        c.seed = derive_seed(config.seed, 0x10000u + static_cast<std::uint64_t>(iter));
        auto run = simulate_run(c);
        if (run.rotated_fraction >= 0.5) {
            lo = mid;
        } else {
            hi = mid;
        }
        ++iter;
    }
    return {0.5 * (lo + hi), lo, hi, iter};
}

/**
 * Joint outcome counts for n pairs drawn from the mixed state with the
 * idler polarizer at V and the signal polarizer at theta, cell off and
 * ideal detectors. Index = 2 * idler_passes + signal_passes.
 */
inline std::array<std::uint64_t, 4> sample_joint_outcomes(PolarizerAngle theta, std::uint64_t n, Rng& rng) {
    const double pass_h = project_polarizer(PolarizationState::horizontal(), theta);
    const double pass_v = project_polarizer(PolarizationState::vertical(), theta);
    std::array<std::uint64_t, 4> counts{};
    for (std::uint64_t k = 0; k < n; ++k) {
        Branch b = sample_branch(rng);
        bool idler = idler_passes_vertical(b);
        bool signal = rng.bernoulli(b == Branch::VH ? pass_v : pass_h);
        ++counts[2 * static_cast<std::size_t>(idler) + static_cast<std::size_t>(signal)];
    }
    return counts;
}

}

#endif
