#ifndef CONDROT_ANALYSIS_HPP
#define CONDROT_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

/**
 * @file analysis.hpp
 * @brief Visibility fits, dilution corrections and efficiency estimates.
 *
 * Curves are fitted to R(theta) = A (1 + V cos 2(theta - theta0)). The model
 * is linear in the harmonic basis R = a + b cos 2theta + c sin 2theta, so the
 * fit is an exact weighted linear least-squares solve; A, V and theta0 and
 * their covariance follow from (a, b, c) by the delta method.
 */

namespace condrot {

/// A value with its one-sigma uncertainty.
struct Measurement {
    double value = 0;
    double sigma = 0;
};

struct CurvePoint {
    double theta = 0;
    double rate = 0;
    double sigma = 0;
};

struct CurveFit {
    double mean_a = 0;
    double visibility_v = 0;
    double phase_theta0 = 0;
    /// Covariance of (A, V, theta0).
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
    double chi2_reduced = 0;

    /// Harmonic coefficients (a, b, c) and their covariance.
    Eigen::Vector3d coefficients = Eigen::Vector3d::Zero();
    Eigen::Matrix3d coefficient_covariance = Eigen::Matrix3d::Zero();
    std::size_t points = 0;

    double sigma_a() const { return std::sqrt(covariance(0, 0)); }
    double sigma_v() const { return std::sqrt(covariance(1, 1)); }
    double sigma_theta0() const { return std::sqrt(covariance(2, 2)); }
    Measurement visibility() const { return {visibility_v, sigma_v()}; }
};

inline CurveFit fit_visibility(std::span<const CurvePoint> points) {
    if (points.size() < 4) {
        throw FitError("fit_visibility: need at least 4 points");
    }

    // Distinct angles modulo pi.
    std::vector<double> reduced;
    for (const auto& p : points) {
        if (!std::isfinite(p.theta) || !std::isfinite(p.rate)) {
            throw FitError("fit_visibility: non-finite point");
        }
        if (!(p.sigma > 0) || !std::isfinite(p.sigma)) {
            throw FitError("fit_visibility: every sigma must be positive");
        }
        double r = std::fmod(p.theta, std::numbers::pi);
        if (r < 0) {
            r += std::numbers::pi;
        }
        bool seen = false;
        for (double q : reduced) {
            double d = std::abs(q - r);
            if (std::min(d, std::numbers::pi - d) < 1e-9) {
                seen = true;
                break;
            }
        }
        if (!seen) {
            reduced.push_back(r);
        }
    }
    if (reduced.size() < 3) {
        throw FitError("fit_visibility: need at least 3 distinct angles modulo pi");
    }

    Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (const auto& p : points) {
        Eigen::Vector3d row(1.0, std::cos(2 * p.theta), std::sin(2 * p.theta));
        double w = 1.0 / (p.sigma * p.sigma);
        normal += w * row * row.transpose();
        rhs += w * p.rate * row;
    }

    Eigen::FullPivLU<Eigen::Matrix3d> lu(normal);
    lu.setThreshold(1e-12);
    if (lu.rank() < 3) {
        throw FitError("fit_visibility: degenerate design matrix");
    }
    Eigen::Vector3d coef = lu.solve(rhs);
    Eigen::Matrix3d cov_abc = lu.inverse();
    cov_abc = 0.5 * (cov_abc + cov_abc.transpose());

    const double a = coef(0), b = coef(1), c = coef(2);
    if (!(a > 0)) {
        throw FitError("fit_visibility: fitted mean rate is not positive");
    }
    const double r = std::hypot(b, c);

    CurveFit fit;
    fit.coefficients = coef;
    fit.coefficient_covariance = cov_abc;
    fit.points = points.size();
    fit.mean_a = a;
    fit.visibility_v = r / a;
    fit.phase_theta0 = 0.5 * std::atan2(c, b);

    Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();
    jac(0, 0) = 1;
    if (r > 0) {
        jac(1, 0) = -r / (a * a);
        jac(1, 1) = b / (a * r);
        jac(1, 2) = c / (a * r);
        jac(2, 1) = -c / (2 * r * r);
        jac(2, 2) = b / (2 * r * r);
        fit.covariance = jac * cov_abc * jac.transpose();
    } else {
        // No preferred direction: isotropic V spread, theta0 uniform over a half period.
        jac(1, 1) = 1 / (a * std::sqrt(2.0));
        jac(1, 2) = 1 / (a * std::sqrt(2.0));
        fit.covariance = jac * cov_abc * jac.transpose();
        fit.covariance(2, 2) = std::numbers::pi * std::numbers::pi / 12;
    }
    fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose());

    double chi2 = 0;
    for (const auto& p : points) {
        double model = a + b * std::cos(2 * p.theta) + c * std::sin(2 * p.theta);
        double z = (p.rate - model) / p.sigma;
        chi2 += z * z;
    }
    fit.chi2_reduced = chi2 / static_cast<double>(points.size() - 3);
    return fit;
}

/// Unpolarized-background fraction b and cell failure probability f, each with uncertainty.
struct VisibilityCorrections {
    Measurement background_fraction;
    Measurement cell_failure_prob;
};

namespace detail {

inline Measurement divide_dilution(Measurement v, Measurement loss, const char* what) {
    if (!(loss.value >= 0 && loss.value < 1)) {
        throw InputError(std::string(what) + " must lie in [0, 1)");
    }
    if (!(loss.sigma >= 0)) {
        throw InputError(std::string(what) + " uncertainty must be >= 0");
    }
    double keep = 1 - loss.value;
    double value = v.value / keep;
    double rel = loss.sigma / keep;
    double sigma = std::sqrt((v.sigma / keep) * (v.sigma / keep) + (value * rel) * (value * rel));
    return {value, sigma};
}

}

/// Visibility after undoing the unpolarized-background dilution only.
inline Measurement correct_for_background(Measurement v_raw, Measurement background_fraction) {
    return detail::divide_dilution(v_raw, background_fraction, "background fraction");
}

/**
 * Undoes the linear dilution V_raw = V (1 - b)(1 - f). The uncertainty
 * combines the raw-visibility error with those of b and f.
 */
inline Measurement correct_visibility(Measurement v_raw, const VisibilityCorrections& corr) {
    Measurement step = correct_for_background(v_raw, corr.background_fraction);
    Measurement out = detail::divide_dilution(step, corr.cell_failure_prob, "cell failure probability");
    if (out.value > 1 + 3 * out.sigma) {
        throw DataError("correct_visibility: corrected visibility exceeds 1 by more than 3 sigma");
    }
    return out;
}

inline Measurement correct_visibility(Measurement v_raw, double background_fraction, double cell_failure_prob) {
    return correct_visibility(v_raw, VisibilityCorrections{{background_fraction, 0}, {cell_failure_prob, 0}});
}

/// Trigger-detector efficiency as the corrected singles visibility.
inline Measurement eta_from_visibility(const CurveFit& fit, const VisibilityCorrections& corr = {}) {
    return correct_visibility(fit.visibility(), corr);
}

/// Expected accidental coincidences r1 r2 window duration, from raw singles counts.
inline double accidental_coincidences(std::uint64_t singles_1, std::uint64_t singles_2, double window, double duration) {
    if (!(duration > 0)) {
        throw InputError("accidental_coincidences: duration must be positive");
    }
    return static_cast<double>(singles_1) * static_cast<double>(singles_2) * window / duration;
}

/**
 * Absolute efficiency of the trigger detector from accidental-corrected
 * coincidences over the other detector's singles.
 *
 * Coincidences are a thinning of the other arm's singles, so their
 * covariance with the singles is taken as var(coincidences); with Poisson
 * inputs this reduces to the binomial error sqrt(eta (1 - eta) / N).
 */
inline Measurement klyshko_efficiency(Measurement coincidences, Measurement singles_other, Measurement accidentals = {}) {
    if (!(singles_other.value > 0)) {
        throw InputError("klyshko_efficiency: singles must be positive");
    }
    double numerator = coincidences.value - accidentals.value;
    if (numerator < 0) {
        throw DataError("klyshko_efficiency: fewer coincidences than accidentals");
    }
    double n = singles_other.value;
    double eta = numerator / n;
    double var_c = coincidences.sigma * coincidences.sigma;
    double var = var_c + eta * eta * singles_other.sigma * singles_other.sigma - 2 * eta * var_c
               + accidentals.sigma * accidentals.sigma;
    return {eta, std::sqrt(std::max(var, 0.0)) / n};
}

/// Poisson measurement of a raw count.
inline Measurement counted(std::uint64_t n) {
    return {static_cast<double>(n), std::sqrt(static_cast<double>(n))};
}

/// Source-on count minus a source-blocked count of equal duration.
inline Measurement blocked_subtracted(std::uint64_t on, std::uint64_t blocked) {
    double on_d = static_cast<double>(on), blocked_d = static_cast<double>(blocked);
    return {on_d - blocked_d, std::sqrt(on_d + blocked_d)};
}

/// Everything that goes into the two efficiency estimates.
struct CalibrationReport {
    CurveFit singles_fit;
    Measurement v_raw;
    Measurement v_background_corrected;
    Measurement v_cell_corrected;
    Measurement eta_from_visibility;
    /// Parts of the eta_from_visibility sigma from counting statistics and from the b, f uncertainties.
    double eta_visibility_sigma_statistical = 0;
    double eta_visibility_sigma_corrections = 0;
    Measurement eta_klyshko;

    VisibilityCorrections corrections;
    std::uint64_t klyshko_coincidences = 0;
    std::uint64_t klyshko_singles_other = 0;
    /// D2 counts with the source blocked, same duration; subtracted from the singles.
    std::uint64_t klyshko_singles_blocked = 0;
    double klyshko_accidentals = 0;

    /// Difference of the two eta estimates in units of their combined sigma.
    double agreement_sigmas() const {
        double s = std::hypot(eta_from_visibility.sigma, eta_klyshko.sigma);
        return s > 0 ? std::abs(eta_from_visibility.value - eta_klyshko.value) / s : 0.0;
    }
};

inline CalibrationReport build_calibration_report(const CurveFit& singles_fit, const VisibilityCorrections& corr,
                                                  std::uint64_t klyshko_coincidences, std::uint64_t klyshko_singles_other,
                                                  double klyshko_accidentals, std::uint64_t klyshko_singles_blocked = 0) {
    CalibrationReport rep;
    rep.singles_fit = singles_fit;
    rep.corrections = corr;
    rep.v_raw = singles_fit.visibility();
    rep.v_background_corrected = correct_for_background(rep.v_raw, corr.background_fraction);
    rep.v_cell_corrected = correct_visibility(rep.v_raw, corr);
    rep.eta_from_visibility = rep.v_cell_corrected;

    double keep = (1 - corr.background_fraction.value) * (1 - corr.cell_failure_prob.value);
    rep.eta_visibility_sigma_statistical = rep.v_raw.sigma / keep;
    double sys2 = rep.eta_from_visibility.sigma * rep.eta_from_visibility.sigma
                - rep.eta_visibility_sigma_statistical * rep.eta_visibility_sigma_statistical;
    rep.eta_visibility_sigma_corrections = std::sqrt(std::max(sys2, 0.0));

    rep.klyshko_coincidences = klyshko_coincidences;
    rep.klyshko_singles_other = klyshko_singles_other;
    rep.klyshko_singles_blocked = klyshko_singles_blocked;
    rep.klyshko_accidentals = klyshko_accidentals;
    rep.eta_klyshko = klyshko_efficiency(counted(klyshko_coincidences),
                                         blocked_subtracted(klyshko_singles_other, klyshko_singles_blocked),
                                         {klyshko_accidentals, std::sqrt(std::max(klyshko_accidentals, 0.0))});
    return rep;
}

}

#endif
