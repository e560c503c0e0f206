#ifndef CONDROT_POLARIZATION_HPP
#define CONDROT_POLARIZATION_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "errors.hpp"

/**
 * @file polarization.hpp
 * @brief Exact polarization algebra for single photons and photon pairs.
 *
 * Single-photon states live on the basis {H, V} (index 0 = H, 1 = V).
 * Two-photon states live on {HH, HV, VH, VV}; the first slot is the signal
 * spatial mode and the second slot is the idler, so the flat index is
 * 2 * signal + idler.
 *
 * Polarizer angles are measured from the vertical transmission axis, so a
 * polarizer at theta transmits |theta> = cos(theta)|V> + sin(theta)|H>.
 * Stokes S1 is positive for vertical light.
 */

namespace condrot {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;

/// Absolute tolerance for exact density-matrix algebra.
inline constexpr double algebra_tolerance = 1e-12;

namespace detail {

template<class Matrix_>
void check_density_matrix(const Matrix_& m, const char* what) {
    if (!m.allFinite()) {
        throw InputError(std::string(what) + ": non-finite entries");
    }
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > algebra_tolerance) {
        throw InputError(std::string(what) + ": matrix is not Hermitian");
    }
    if (std::abs(m.trace() - Complex(1.0)) > algebra_tolerance) {
        throw InputError(std::string(what) + ": trace differs from 1");
    }
    // Symmetrize before the eigen-solve; the Hermitian check above bounds the change.
    Matrix_ herm = (m + m.adjoint()) * 0.5;
    Eigen::SelfAdjointEigenSolver<Matrix_> solver(herm, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -algebra_tolerance) {
        throw InputError(std::string(what) + ": matrix is not positive semidefinite");
    }
}

}

/**
 * Polarizer transmission axis, canonically reduced to [0, pi) because a
 * polarizer is pi-periodic. Zero is the vertical axis.
 */
class PolarizerAngle {
public:
    PolarizerAngle() = default;

    static PolarizerAngle from_radians(double theta) {
        if (!std::isfinite(theta)) {
            throw InputError("polarizer angle must be finite");
        }
        double reduced = std::fmod(theta, std::numbers::pi);
        if (reduced < 0) {
            reduced += std::numbers::pi;
        }
        if (reduced >= std::numbers::pi) {
            reduced = 0;
        }
        PolarizerAngle out;
        out.theta_ = reduced;
        return out;
    }

    static PolarizerAngle from_degrees(double degrees) {
        return from_radians(degrees * std::numbers::pi / 180.0);
    }

    static PolarizerAngle vertical() { return from_radians(0); }
    static PolarizerAngle horizontal() { return from_radians(std::numbers::pi / 2); }

    double radians() const { return theta_; }
    double degrees() const { return theta_ * 180.0 / std::numbers::pi; }

    /// Projector |theta><theta| over {H, V}.
    Matrix2c projector() const {
        double c = std::cos(theta_), s = std::sin(theta_);
        Matrix2c p;
        p << s * s, s * c,
             s * c, c * c;
        return p;
    }

    friend bool operator==(const PolarizerAngle&, const PolarizerAngle&) = default;

private:
    double theta_ = 0;
};

/**
 * 2x2 polarization density matrix of a single photon over {H, V}.
 * Construction validates Hermiticity, unit trace and positivity.
 */
class PolarizationState {
public:
    explicit PolarizationState(const Matrix2c& m) : matrix_(m) {
        detail::check_density_matrix(matrix_, "PolarizationState");
    }

    static PolarizationState diagonal(double p_h, double p_v) {
        Matrix2c m = Matrix2c::Zero();
        m(0, 0) = p_h;
        m(1, 1) = p_v;
        return PolarizationState(m);
    }

    static PolarizationState horizontal() { return diagonal(1, 0); }
    static PolarizationState vertical() { return diagonal(0, 1); }
    static PolarizationState maximally_mixed() { return diagonal(0.5, 0.5); }

    const Matrix2c& matrix() const { return matrix_; }
    double p_h() const { return matrix_(0, 0).real(); }
    double p_v() const { return matrix_(1, 1).real(); }
    Complex coherence_hv() const { return matrix_(0, 1); }

    double purity() const { return (matrix_ * matrix_).trace().real(); }

private:
    Matrix2c matrix_;
};

/// Which spatial mode of the pair to keep (or condition on).
enum class Subsystem { signal, idler };

/**
 * 4x4 two-photon density matrix over {HH, HV, VH, VV}, signal first.
 */
class TwoPhotonState {
public:
    explicit TwoPhotonState(const Matrix4c& m) : matrix_(m) {
        detail::check_density_matrix(matrix_, "TwoPhotonState");
    }

    /// Product state rho_signal (x) rho_idler.
    static TwoPhotonState product(const PolarizationState& signal, const PolarizationState& idler) {
        Matrix4c m;
        for (int s1 = 0; s1 < 2; ++s1) {
            for (int i1 = 0; i1 < 2; ++i1) {
                for (int s2 = 0; s2 < 2; ++s2) {
                    for (int i2 = 0; i2 < 2; ++i2) {
                        m(2 * s1 + i1, 2 * s2 + i2) = signal.matrix()(s1, s2) * idler.matrix()(i1, i2);
                    }
                }
            }
        }
        return TwoPhotonState(m);
    }

    const Matrix4c& matrix() const { return matrix_; }
    double purity() const { return (matrix_ * matrix_).trace().real(); }

private:
    Matrix4c matrix_;
};

/// Stokes quadruple. s0 carries the photon-number scale (or 1 when normalized).
struct StokesVector {
    double s0 = 0;
    double s1 = 0;
    double s2 = 0;
    double s3 = 0;

    double polarized_norm() const { return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3); }

    bool is_physical() const {
        return s0 >= 0 && (s1 * s1 + s2 * s2 + s3 * s3) <= s0 * s0 * (1 + 1e-9);
    }
};

/// Pure pair state (|HV> + e^{i phi}|VH>)/sqrt(2) as a projector.
inline TwoPhotonState make_pure_biphoton(double phi) {
    if (!std::isfinite(phi)) {
        throw InputError("make_pure_biphoton: phase must be finite");
    }
    Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
    psi(1) = 1.0 / std::sqrt(2.0);
    psi(2) = std::polar(1.0 / std::sqrt(2.0), phi);
    return TwoPhotonState(psi * psi.adjoint());
}

/// Phase-averaged pair state (|HV><HV| + |VH><VH|)/2.
inline TwoPhotonState make_mixed_biphoton() {
    Matrix4c m = Matrix4c::Zero();
    m(1, 1) = 0.5;
    m(2, 2) = 0.5;
    return TwoPhotonState(m);
}

/// Reduced single-photon state of the requested mode.
inline PolarizationState partial_trace(const TwoPhotonState& state, Subsystem keep) {
    const Matrix4c& m = state.matrix();
    Matrix2c out = Matrix2c::Zero();
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            for (int k = 0; k < 2; ++k) {
                if (keep == Subsystem::signal) {
                    out(a, b) += m(2 * a + k, 2 * b + k);
                } else {
                    out(a, b) += m(2 * k + a, 2 * k + b);
                }
            }
        }
    }
    return PolarizationState(out);
}

/// Real rotation of the (H, V) amplitudes by alpha; alpha = pi/2 swaps H and V.
inline Matrix2c rotation_matrix(double alpha) {
    double c = std::cos(alpha), s = std::sin(alpha);
    Matrix2c r;
    r << c, -s,
         s, c;
    return r;
}

inline PolarizationState apply_rotation(const PolarizationState& state, double alpha) {
    if (!std::isfinite(alpha)) {
        throw InputError("apply_rotation: angle must be finite");
    }
    Matrix2c r = rotation_matrix(alpha);
    return PolarizationState(r * state.matrix() * r.adjoint());
}

/// Transmission probability tr(rho P_theta) through a polarizer at `angle`.
inline double project_polarizer(const PolarizationState& state, PolarizerAngle angle) {
    double p = (state.matrix() * angle.projector()).trace().real();
    return std::clamp(p, 0.0, 1.0);
}

/// Probability that the signal passes `signal_angle` and the idler passes `idler_angle`.
inline double joint_pass_probability(const TwoPhotonState& state, PolarizerAngle signal_angle, PolarizerAngle idler_angle) {
    Matrix2c ps = signal_angle.projector();
    Matrix2c pi = idler_angle.projector();
    Matrix4c joint;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            joint(r, c) = ps(r / 2, c / 2) * pi(r % 2, c % 2);
        }
    }
    double p = (state.matrix() * joint).trace().real();
    return std::clamp(p, 0.0, 1.0);
}

struct ConditionalState {
    double probability;
    PolarizationState signal_state;
};

/// Signal state given that the idler passed a polarizer at `idler_angle`.
inline ConditionalState condition_on_idler(const TwoPhotonState& state, PolarizerAngle idler_angle) {
    Matrix2c pi = idler_angle.projector();
    Matrix4c proj;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            proj(r, c) = (r / 2 == c / 2 ? Complex(1.0) : Complex(0.0)) * pi(r % 2, c % 2);
        }
    }
    Matrix4c post = proj * state.matrix() * proj;
    double probability = post.trace().real();
    if (!(probability > algebra_tolerance)) {
        throw UndefinedConditionalError("condition_on_idler: outcome has zero probability");
    }
    Matrix4c normalized = post / probability;
    Matrix2c signal = Matrix2c::Zero();
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            for (int k = 0; k < 2; ++k) {
                signal(a, b) += normalized(2 * a + k, 2 * b + k);
            }
        }
    }
    return {probability, PolarizationState(signal)};
}

inline ConditionalState condition_on_idler_V(const TwoPhotonState& state) {
    return condition_on_idler(state, PolarizerAngle::vertical());
}

/**
 * Signal state after feed-forward with a trigger detector of efficiency eta:
 * a detected vertical idler rotates its partner by 90 degrees, everything
 * else passes untouched. Built from the mixed pair state, so the result is
 * diag((1-eta)/2, (1+eta)/2) over {H, V}.
 */
inline PolarizationState conditional_feedforward_state(double eta) {
    if (!(eta >= 0 && eta <= 1)) {
        throw InputError("conditional_feedforward_state: eta must lie in [0, 1]");
    }
    TwoPhotonState pair = make_mixed_biphoton();
    auto triggered = condition_on_idler_V(pair);
    auto blocked = condition_on_idler(pair, PolarizerAngle::horizontal());
    Matrix2c rotated = apply_rotation(triggered.signal_state, std::numbers::pi / 2).matrix();
    Matrix2c m = triggered.probability * (eta * rotated + (1 - eta) * triggered.signal_state.matrix())
               + blocked.probability * blocked.signal_state.matrix();
    return PolarizationState(m);
}

inline StokesVector stokes_from_state(const PolarizationState& state, double n = 1.0) {
    if (!(n >= 0) || !std::isfinite(n)) {
        throw InputError("stokes_from_state: photon-number scale must be finite and non-negative");
    }
    const Matrix2c& m = state.matrix();
    return {
        n,
        n * (m(1, 1).real() - m(0, 0).real()),
        n * 2.0 * m(0, 1).real(),
        n * 2.0 * m(1, 0).imag(),
    };
}

inline PolarizationState state_from_stokes(const StokesVector& s) {
    if (!(s.s0 > 0) || !std::isfinite(s.s0)) {
        throw InputError("state_from_stokes: s0 must be positive");
    }
    double q = s.s1 / s.s0, u = s.s2 / s.s0, v = s.s3 / s.s0;
    if (q * q + u * u + v * v > 1 + 1e-9) {
        throw InputError("state_from_stokes: degree of polarization exceeds 1");
    }
    double norm = std::sqrt(q * q + u * u + v * v);
    if (norm > 1) {
        q /= norm;
        u /= norm;
        v /= norm;
    }
    Matrix2c m;
    m << Complex(0.5 * (1 - q), 0), Complex(0.5 * u, -0.5 * v),
         Complex(0.5 * u, 0.5 * v), Complex(0.5 * (1 + q), 0);
    return PolarizationState(m);
}

inline double degree_of_polarization(const StokesVector& s) {
    if (!(s.s0 > 0)) {
        throw InputError("degree_of_polarization: s0 must be positive");
    }
    return s.polarized_norm() / s.s0;
}

}

#endif
