// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "condrot/condrot.hpp"

using namespace condrot;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double deg = pi / 180;
const fs::path scenario_dir = CONDROT_SCENARIO_DIR;
const std::string cli = CONDROT_CLI_PATH;

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) {
            detail += "; ";
        }
        detail += what + (ok ? "" : " [x]");
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

/// Angular distance modulo pi.
double angle_gap(double a, double b) { return std::abs(std::remainder(a - b, pi)); }

Scenario scenario(const char* name) { return load_scenario((scenario_dir / name).string()); }

int failures = 0;

void criterion(int id, const char* name, double limit_seconds, const std::function<Outcome()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_seconds > 0) {
        o.check(secs < limit_seconds, fmt("runtime %.2f s < %.0f s", secs, limit_seconds));
    }
    failures += !o.pass;
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}

int main() {
    criterion(1, "purification law P = eta", 1.0, [] {
        Outcome o;
        double worst = 0;
        for (int k = 0; k <= 10; ++k) {
            double eta = 0.1 * k;
            double p = degree_of_polarization(stokes_from_state(conditional_feedforward_state(eta), 1.0));
            worst = std::max(worst, std::abs(p - eta));
        }
        o.check(worst <= 1e-12, fmt("max |P - eta| = %.3g <= 1e-12", worst));
        return o;
    });

    criterion(2, "singles law 1 + eta cos(2 theta)", 60.0, [] {
        Outcome o;
        auto s = scenario("fig2.conf");
        auto out = run_scenario(s);
        std::uint64_t fewest = UINT64_MAX;
        for (const auto& p : out.scan) {
            fewest = std::min(fewest, p.run.diagnostics.d1_photon);
        }
        o.check(out.scan.size() == 13, fmt("%.0f angles", double(out.scan.size())));
        o.check(fewest >= 200000, fmt("min V-selected idler detections per point %.0f >= 2e5", double(fewest)));
        double v = out.singles_fit->visibility_v;
        double th = out.singles_fit->phase_theta0;
        o.check(std::abs(v - 0.476) <= 0.01, fmt("V = %.5f within 0.476 +- 0.01", v));
        o.check(angle_gap(th, 0) <= 1 * deg, fmt("theta0 = %.4f deg within +-1 deg of vertical", th / deg));
        return o;
    });

    criterion(3, "raw vs corrected visibility", 60.0, [] {
        Outcome o;
        auto s = scenario("calib.conf");
        auto out = run_scenario(s);
        const auto& rep = *out.calibration;
        double keep = (1 - rep.corrections.background_fraction.value) * (1 - rep.corrections.cell_failure_prob.value);
        o.check(std::abs(keep - 0.68) <= 1e-12, fmt("(1-b)(1-f) = %.12f (b = %.4f, f = %.4f)", keep,
                                                    rep.corrections.background_fraction.value, rep.corrections.cell_failure_prob.value));
        o.check(std::abs(rep.v_raw.value - 0.30) <= 0.02, fmt("raw V = %.4f within 0.30 +- 0.02", rep.v_raw.value));
        o.check(std::abs(rep.v_cell_corrected.value - 0.44) <= 0.02,
                fmt("corrected V = %.4f +- %.4f within 0.44 +- 0.02", rep.v_cell_corrected.value, rep.v_cell_corrected.sigma));
        return o;
    });

    criterion(4, "delay scan step", 60.0, [] {
        Outcome o;
        auto s = scenario("fig4.conf");
        auto is = [](double a, double b) { return std::abs(a - b) <= 1e-15 * b; };
        o.check(is(s.config.t_fiber, 248e-9) && is(s.config.t0_internal, 148e-9) && is(s.config.pulse_flat, 100e-9) &&
                    is(s.config.pulse_rise, 2e-9),
                "timing 248/148/100/2 ns");
        auto out = run_scenario(s);
        const ScanPoint *at0 = nullptr, *at150 = nullptr;
        for (const auto& p : out.scan) {
            if (std::abs(p.x) < 1e-12 * 1e-9) {
                at0 = &p;
            }
            if (std::abs(p.x - 150e-9) < 1e-12 * 1e-9) {
                at150 = &p;
            }
        }
        if (!at0 || !at150) {
            o.check(false, "scan must include T = 0 and T = 150 ns");
            return o;
        }
        o.check(at0->run.rotated_fraction > 0.99, fmt("rotated(T=0) = %.4f > 0.99", at0->run.rotated_fraction));
        o.check(at150->run.rotated_fraction < 0.01, fmt("rotated(T=150 ns) = %.4f < 0.01", at150->run.rotated_fraction));
        if (!out.edge) {
            o.check(false, "no edge found");
            return o;
        }
        o.check(std::abs(out.edge->delay - 98e-9) <= 5e-9, fmt("edge = %.2f ns within 98 +- 5 ns", out.edge->delay * 1e9));
        return o;
    });

    criterion(5, "coincidence phase shift and dead-time dilution", 120.0, [] {
        Outcome o;
        auto on = run_scenario(scenario("fig3.conf"));
        auto off = run_scenario(scenario("fig3_cell_off.conf"));
        double v_on = on.coincidence_fit->visibility_v;
        double shift = angle_gap(on.coincidence_fit->phase_theta0 - off.coincidence_fit->phase_theta0, 0);
        double shift_from_90 = std::abs(shift - pi / 2);
        o.check(v_on >= 0.99, fmt("V_coinc(cell on, low rate) = %.4f >= 0.99", v_on));
        o.check(shift_from_90 <= 1 * deg, fmt("theta0 shift = %.3f deg within 90 +- 1 deg", shift / deg));

        // Rate oracle: 1 - exp(-r tau) = 0.05 solved for the trigger rate.
        auto dead = scenario("fig3_deadtime.conf");
        double r = -std::log(0.95) / dead.config.cell_dead_time;
        double trigger_rate = 0.5 * dead.config.pair_rate * dead.config.eta_idler;
        o.check(std::abs(trigger_rate / r - 1) <= 1e-4, fmt("D1 rate %.1f Hz vs oracle %.1f Hz", trigger_rate, r));
        auto hot = run_scenario(dead);
        std::uint64_t requested = 0, busy = 0;
        for (const auto& p : hot.scan) {
            requested += p.run.diagnostics.triggers_requested;
            busy += p.run.diagnostics.triggers_busy;
        }
        double fail = double(busy) / double(requested);
        o.check(std::abs(fail - 0.05) <= 0.01, fmt("measured dead-time failure fraction %.4f within 0.05 +- 0.01", fail));
        double v_hot = hot.coincidence_fit->visibility_v;
        o.check(std::abs(v_hot - 0.90) <= 0.02, fmt("V_coinc(dead time) = %.4f within 0.90 +- 0.02", v_hot));
        return o;
    });

    criterion(6, "Klyshko calibration", 60.0, [] {
        Outcome o;
        ExperimentConfig c;
        c.pair_rate = 1e5;
        c.duration = 10;
        c.eta_idler = 0.476;
        c.seed = 606;
        for (double eta_s : {0.3, 0.1, 0.9}) {
            c.eta_signal = eta_s;
            auto k = run_klyshko(c);
            o.check(std::abs(k.eta.value - 0.476) <= 0.005,
                    fmt("eta_s = %.1f: eta = %.5f +- %.5f", eta_s, k.eta.value, k.eta.sigma) +
                        fmt(" from %.0f pairs", double(k.run.diagnostics.pairs_emitted)));
        }
        return o;
    });

    criterion(7, "sampling soundness oracle", 30.0, [] {
        Outcome o;
        auto s = scenario("oracle.conf");
        o.check(s.oracle_samples == 100000, "N = 1e5 per angle");
        auto out = run_scenario(s);
        auto kv = KeyValueFile::parse(out.report);
        for (std::size_t i = 0; i < s.oracle_thetas.size(); ++i) {
            auto p = kv.take("oracle.theta." + std::to_string(i) + ".p_value");
            double pv = p ? parse_quantity(*p, Quantity::dimensionless) : -1;
            o.check(pv > 0.001, fmt("theta %.0f deg: p = %.4f > 0.001", s.oracle_thetas[i] / deg, pv));
        }
        return o;
    });

    criterion(8, "determinism of every scenario", 0, [] {
        Outcome o;
        auto root = fs::temp_directory_path() / ("condrot_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(root);
        std::vector<fs::path> confs;
        for (const auto& e : fs::directory_iterator(scenario_dir)) {
            if (e.path().extension() == ".conf") {
                confs.push_back(e.path());
            }
        }
        std::sort(confs.begin(), confs.end());
        int identical = 0;
        for (const auto& conf : confs) {
            bool same = true;
            std::string stem = conf.stem().string();
            for (const char* run : {"a", "b"}) {
                auto dir = root / stem / run;
                std::string cmd = cli + " run --config '" + conf.string() + "' --out '" + dir.string() + "' > /dev/null 2>&1";
                int raw = std::system(cmd.c_str());
                same = same && WIFEXITED(raw) && WEXITSTATUS(raw) == 0;
            }
            for (const char* file : {"curve.csv", "report.txt"}) {
                auto a = root / stem / "a" / file, b = root / stem / "b" / file;
                if (fs::exists(a) || fs::exists(b)) {
                    same = same && fs::exists(a) && fs::exists(b) && slurp(a) == slurp(b);
                }
            }
            same = same && fs::exists(root / stem / "a" / "report.txt");
            identical += same;
            if (!same) {
                o.check(false, stem + " differs or failed");
            }
        }
        // Klyshko runs are in-process only; compare their reports as well.
        ExperimentConfig c;
        c.pair_rate = 1e5;
        c.duration = 1;
        auto k1 = run_klyshko(c), k2 = run_klyshko(c);
        bool kl = k1.run.singles_d2 == k2.run.singles_d2 && k1.run.coincidences == k2.run.coincidences && k1.eta.value == k2.eta.value;
        o.check(kl, "klyshko rerun identical");
        o.check(identical == int(confs.size()) && !confs.empty(),
                fmt("%.0f/%.0f scenarios byte-identical on rerun", identical, double(confs.size())));
        fs::remove_all(root);
        return o;
    });

    std::printf("%s: %d criteria failed\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED", failures);
    return failures ? 1 : 0;
}
