#include <cmath>
#include <numbers>

#include "gtest/gtest.h"

#include "condrot/polarization.hpp"
#include "condrot/random.hpp"

using namespace condrot;

namespace {

constexpr double tol = 1e-12;
constexpr double pi = std::numbers::pi;

template<class A_, class B_>
double max_abs_diff(const A_& a, const B_& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

/// Random density matrix A A^dagger / tr, A with uniform complex entries.
PolarizationState random_state(Rng& rng) {
    Matrix2c a;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            a(i, j) = Complex(2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
        }
    }
    Matrix2c m = a * a.adjoint();
    m /= m.trace();
    return PolarizationState(m);
}

Matrix4c basis_projector(int index) {
    Matrix4c m = Matrix4c::Zero();
    m(index, index) = 1;
    return m;
}

}

TEST(PolarizationState, rejects_invalid_matrices) {
    Matrix2c not_hermitian;
    not_hermitian << 0.5, 0.1, 0.0, 0.5;
    EXPECT_THROW(PolarizationState{not_hermitian}, InputError);

    Matrix2c bad_trace = Matrix2c::Identity();
    EXPECT_THROW(PolarizationState{bad_trace}, InputError);

    Matrix2c negative;
    negative << 1.5, 0, 0, -0.5;
    EXPECT_THROW(PolarizationState{negative}, InputError);
}

TEST(PolarizerAngle, reduces_to_half_open_interval) {
    EXPECT_DOUBLE_EQ(PolarizerAngle::from_radians(pi + 0.25).radians(), 0.25);
    EXPECT_NEAR(PolarizerAngle::from_radians(-0.25).radians(), pi - 0.25, 1e-15);
    EXPECT_EQ(PolarizerAngle::from_radians(pi).radians(), 0.0);
    EXPECT_NEAR(PolarizerAngle::from_degrees(90).radians(), pi / 2, 1e-15);
    EXPECT_THROW(PolarizerAngle::from_radians(NAN), InputError);
}

TEST(MakePureBiphoton, phase_zero_expansion) {
    auto s = make_pure_biphoton(0);
    Matrix4c expected = Matrix4c::Zero();
    expected(1, 1) = expected(2, 2) = expected(1, 2) = expected(2, 1) = 0.5;
    EXPECT_LE(max_abs_diff(s.matrix(), expected), tol);
    EXPECT_NEAR(s.purity(), 1.0, tol);
}

TEST(MakePureBiphoton, phase_pi_flips_coherence) {
    auto s = make_pure_biphoton(pi);
    EXPECT_NEAR(s.matrix()(1, 2).real(), -0.5, tol);
    EXPECT_NEAR(s.matrix()(2, 1).real(), -0.5, tol);
    EXPECT_NEAR(s.matrix()(1, 2).imag(), 0.0, tol);
}

TEST(MakePureBiphoton, reduced_states_are_unpolarized_for_any_phase) {
    for (double phi = -3.0; phi <= 7.0; phi += 0.37) {
        auto s = make_pure_biphoton(phi);
        EXPECT_LE(max_abs_diff(partial_trace(s, Subsystem::signal).matrix(), PolarizationState::maximally_mixed().matrix()), tol);
        EXPECT_LE(max_abs_diff(partial_trace(s, Subsystem::idler).matrix(), PolarizationState::maximally_mixed().matrix()), tol);
    }
}

TEST(MakePureBiphoton, rejects_non_finite_phase) {
    EXPECT_THROW(make_pure_biphoton(INFINITY), InputError);
}

TEST(MakeMixedBiphoton, diagonal_expansion_and_purity) {
    auto s = make_mixed_biphoton();
    Matrix4c expected = Matrix4c::Zero();
    expected(1, 1) = expected(2, 2) = 0.5;
    EXPECT_LE(max_abs_diff(s.matrix(), expected), tol);
    EXPECT_NEAR(s.purity(), 0.5, tol);
}

TEST(MakeMixedBiphoton, equals_phase_average_of_pure_states) {
    // Oracle: average of the pure state over a uniform phase grid.
    const int n = 4096;
    Matrix4c avg = Matrix4c::Zero();
    for (int k = 0; k < n; ++k) {
        avg += make_pure_biphoton(2 * pi * k / n).matrix();
    }
    avg /= n;
    EXPECT_LE(max_abs_diff(avg, make_mixed_biphoton().matrix()), tol);
}

TEST(PartialTrace, examples) {
    EXPECT_LE(max_abs_diff(partial_trace(make_mixed_biphoton(), Subsystem::signal).matrix(),
                           PolarizationState::maximally_mixed().matrix()), tol);

    TwoPhotonState hv(basis_projector(1));
    EXPECT_LE(max_abs_diff(partial_trace(hv, Subsystem::signal).matrix(), PolarizationState::horizontal().matrix()), tol);
    EXPECT_LE(max_abs_diff(partial_trace(hv, Subsystem::idler).matrix(), PolarizationState::vertical().matrix()), tol);

    EXPECT_LE(max_abs_diff(partial_trace(make_pure_biphoton(0.7), Subsystem::idler).matrix(),
                           PolarizationState::maximally_mixed().matrix()), tol);
}

TEST(PartialTrace, product_states_factor) {
    Rng rng(11);
    for (int k = 0; k < 50; ++k) {
        auto a = random_state(rng), b = random_state(rng);
        auto pair = TwoPhotonState::product(a, b);
        EXPECT_LE(max_abs_diff(partial_trace(pair, Subsystem::signal).matrix(), a.matrix()), tol);
        EXPECT_LE(max_abs_diff(partial_trace(pair, Subsystem::idler).matrix(), b.matrix()), tol);
    }
}

TEST(ApplyRotation, examples) {
    EXPECT_LE(max_abs_diff(apply_rotation(PolarizationState::horizontal(), pi / 2).matrix(),
                           PolarizationState::vertical().matrix()), tol);
    EXPECT_LE(max_abs_diff(apply_rotation(PolarizationState::vertical(), pi / 2).matrix(),
                           PolarizationState::horizontal().matrix()), tol);

    Rng rng(3);
    auto rho = random_state(rng);
    EXPECT_LE(max_abs_diff(apply_rotation(rho, 0).matrix(), rho.matrix()), tol);
    for (double a : {0.1, 1.0, 2.5, -4.0}) {
        EXPECT_LE(max_abs_diff(apply_rotation(PolarizationState::maximally_mixed(), a).matrix(),
                               PolarizationState::maximally_mixed().matrix()), tol);
    }
    EXPECT_THROW(apply_rotation(rho, NAN), InputError);
}

TEST(ApplyRotation, inverse_property) {
    Rng rng(5);
    for (int k = 0; k < 200; ++k) {
        auto rho = random_state(rng);
        double alpha = 20 * rng.uniform() - 10;
        auto back = apply_rotation(apply_rotation(rho, alpha), -alpha);
        EXPECT_LE(max_abs_diff(back.matrix(), rho.matrix()), tol);
    }
}

TEST(ProjectPolarizer, examples) {
    for (double th : {0.0, 0.3, 1.2, 2.9}) {
        EXPECT_NEAR(project_polarizer(PolarizationState::maximally_mixed(), PolarizerAngle::from_radians(th)), 0.5, tol);
    }
    EXPECT_NEAR(project_polarizer(PolarizationState::vertical(), PolarizerAngle::vertical()), 1.0, tol);
    EXPECT_NEAR(project_polarizer(PolarizationState::horizontal(), PolarizerAngle::vertical()), 0.0, tol);
    EXPECT_NEAR(project_polarizer(conditional_feedforward_state(0.476), PolarizerAngle::from_radians(pi / 4)), 0.5, tol);
}

TEST(ProjectPolarizer, feedforward_state_follows_cos2theta_law) {
    // Oracle: tr(rho P) = (1-eta)/2 sin^2 + (1+eta)/2 cos^2 = (1 + eta cos 2theta)/2.
    for (double eta : {0.0, 0.25, 0.476, 1.0}) {
        auto rho = conditional_feedforward_state(eta);
        for (double th = 0; th < pi; th += pi / 17) {
            EXPECT_NEAR(project_polarizer(rho, PolarizerAngle::from_radians(th)), 0.5 * (1 + eta * std::cos(2 * th)), tol);
        }
    }
}

TEST(ProjectPolarizer, orthogonal_settings_sum_to_one) {
    Rng rng(9);
    for (int k = 0; k < 200; ++k) {
        auto rho = random_state(rng);
        double th = 10 * rng.uniform() - 5;
        double sum = project_polarizer(rho, PolarizerAngle::from_radians(th))
                   + project_polarizer(rho, PolarizerAngle::from_radians(th + pi / 2));
        EXPECT_NEAR(sum, 1.0, tol);
    }
}

TEST(ConditionOnIdlerV, examples) {
    auto mixed = condition_on_idler_V(make_mixed_biphoton());
    EXPECT_NEAR(mixed.probability, 0.5, tol);
    EXPECT_LE(max_abs_diff(mixed.signal_state.matrix(), PolarizationState::horizontal().matrix()), tol);

    TwoPhotonState vv(basis_projector(3));
    auto c = condition_on_idler_V(vv);
    EXPECT_NEAR(c.probability, 1.0, tol);
    EXPECT_LE(max_abs_diff(c.signal_state.matrix(), PolarizationState::vertical().matrix()), tol);

    TwoPhotonState vh(basis_projector(2));
    EXPECT_THROW(condition_on_idler_V(vh), UndefinedConditionalError);
}

TEST(ConditionOnIdlerV, pure_and_mixed_pairs_agree) {
    auto mixed = condition_on_idler_V(make_mixed_biphoton());
    for (double phi = 0; phi < 2 * pi; phi += 0.41) {
        auto pure = condition_on_idler_V(make_pure_biphoton(phi));
        EXPECT_NEAR(pure.probability, 0.5, tol);
        EXPECT_NEAR(pure.probability, mixed.probability, tol);
        EXPECT_LE(max_abs_diff(pure.signal_state.matrix(), mixed.signal_state.matrix()), tol);
    }
}

TEST(ConditionalFeedforwardState, examples) {
    EXPECT_LE(max_abs_diff(conditional_feedforward_state(0).matrix(), PolarizationState::maximally_mixed().matrix()), tol);
    EXPECT_LE(max_abs_diff(conditional_feedforward_state(1).matrix(), PolarizationState::vertical().matrix()), tol);
    auto s = conditional_feedforward_state(0.476);
    EXPECT_NEAR(s.p_h(), 0.262, tol);
    EXPECT_NEAR(s.p_v(), 0.738, tol);
    EXPECT_NEAR(std::abs(s.coherence_hv()), 0.0, tol);

    EXPECT_THROW(conditional_feedforward_state(-0.01), InputError);
    EXPECT_THROW(conditional_feedforward_state(1.01), InputError);
}

TEST(Stokes, examples) {
    auto s = stokes_from_state(PolarizationState::maximally_mixed(), 1000);
    EXPECT_DOUBLE_EQ(s.s0, 1000);
    EXPECT_NEAR(s.s1, 0, 1e-9);
    EXPECT_NEAR(s.s2, 0, 1e-9);
    EXPECT_NEAR(s.s3, 0, 1e-9);

    auto t = stokes_from_state(conditional_feedforward_state(0.476), 1000);
    EXPECT_NEAR(t.s1, 476, 1e-9);
    EXPECT_NEAR(t.s2, 0, 1e-9);
    EXPECT_NEAR(t.s3, 0, 1e-9);

    EXPECT_LE(max_abs_diff(state_from_stokes({1, 0, 0, 0}).matrix(), PolarizationState::maximally_mixed().matrix()), tol);
    EXPECT_LE(max_abs_diff(state_from_stokes({1, 1, 0, 0}).matrix(), PolarizationState::vertical().matrix()), tol);
    EXPECT_LE(max_abs_diff(state_from_stokes({1, 0.476, 0, 0}).matrix(), conditional_feedforward_state(0.476).matrix()), tol);

    EXPECT_THROW(state_from_stokes({1, 0.9, 0.9, 0}), InputError);
    EXPECT_THROW(state_from_stokes({0, 0, 0, 0}), InputError);
    EXPECT_THROW(stokes_from_state(PolarizationState::vertical(), -1), InputError);
}

TEST(Stokes, round_trip_on_random_states) {
    Rng rng(21);
    for (int k = 0; k < 200; ++k) {
        auto rho = random_state(rng);
        auto s = stokes_from_state(rho, 1);
        EXPECT_TRUE(s.is_physical());
        EXPECT_LE(max_abs_diff(state_from_stokes(s).matrix(), rho.matrix()), tol);
    }
}

TEST(Stokes, diagonal_plus_is_positive_s2) {
    // |+45> = (|H> + |V>)/sqrt(2)
    Matrix2c m;
    m << 0.5, 0.5, 0.5, 0.5;
    auto s = stokes_from_state(PolarizationState(m), 1);
    EXPECT_NEAR(s.s2, 1.0, tol);
    EXPECT_NEAR(degree_of_polarization(s), 1.0, tol);
}

TEST(DegreeOfPolarization, examples) {
    EXPECT_NEAR(degree_of_polarization({500, 0, 0, 0}), 0.0, tol);
    EXPECT_NEAR(degree_of_polarization({500, 0.476 * 500, 0, 0}), 0.476, tol);
    EXPECT_NEAR(degree_of_polarization({1, 0.6, 0.8, 0}), 1.0, tol);
    EXPECT_THROW(degree_of_polarization({0, 0, 0, 0}), InputError);
    EXPECT_THROW(degree_of_polarization({-1, 0, 0, 0}), InputError);
}

TEST(DegreeOfPolarization, purification_law_on_grid) {
    for (int k = 0; k <= 100; ++k) {
        double eta = k / 100.0;
        EXPECT_NEAR(degree_of_polarization(stokes_from_state(conditional_feedforward_state(eta), 1)), eta, tol);
    }
}
