#include <gtest/gtest.h>

#include <cmath>

#include "magsq/model.hpp"

using namespace magsq;

namespace {

constexpr double kMHz = 1e6;

double mhz(double angular) { return angular_to_hz(angular) / kMHz; }

Eigen::VectorXd spectrum(const ModeOperator& h) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(h.matrix(), Eigen::EigenvaluesOnly).eigenvalues();
}

/// Largest relative error of the lowest six levels, measured from each ground.
double dispersive_vs_jc(double ratio) {
    DeviceParams p;
    p.omega_q = p.omega_m - ratio * p.g_qm;
    const auto s = HilbertSpec::single(12);
    const auto ej = spectrum(jc_hamiltonian(p, s));
    const auto ed = spectrum(dispersive_hamiltonian(p, dispersive_coefficients(p), s));
    double worst = 0.0;
    for (int k = 1; k < 6; ++k) {
        const double dj = ej(k) - ej(0);
        worst = std::max(worst, std::abs(dj - (ed(k) - ed(0))) / std::abs(dj));
    }
    return worst;
}

}  // namespace

TEST(DeviceParams, DefaultsAreConsistent) {
    const DeviceParams p;
    EXPECT_NO_THROW(p.validate());
    EXPECT_NEAR(mhz(p.detuning()), 76.0, 1e-6);
    EXPECT_NEAR(std::abs(p.eta - (p.omega_ef - p.omega_ge)), 0.0, 1e-6 * std::abs(p.eta));
    DeviceParams bad = p;
    bad.omega_q = p.omega_m + hz_to_angular(1e6);
    EXPECT_THROW(bad.validate(), DomainError);
    bad = p;
    bad.eta = hz_to_angular(-200e6);
    EXPECT_THROW(bad.validate(), DomainError);
}

TEST(DispersiveShift, Examples) {
    const double g = hz_to_angular(20e6), d = hz_to_angular(76e6);
    // 400/76 - 160000/438976 MHz
    EXPECT_NEAR(mhz(dispersive_shift(g, d)), 400.0 / 76.0 - 160000.0 / 438976.0, 1e-9);
    EXPECT_NEAR(mhz(dispersive_shift(g, d)), 4.899, 5e-4);
    EXPECT_EQ(dispersive_shift(0.0, d), 0.0);
    EXPECT_NEAR(dispersive_shift(d / 2.0, d), 3.0 * d / 16.0, 1e-9 * d);
    EXPECT_THROW(dispersive_shift(g, 0.0), DomainError);
}

TEST(SelfKerr, Examples) {
    const double g = hz_to_angular(20e6), d = hz_to_angular(76e6);
    EXPECT_NEAR(mhz(self_kerr(g, d)), 0.36, 0.02 * 0.36);
    EXPECT_NEAR(mhz(self_kerr(g, d)), 160000.0 / 438976.0, 1e-9);
    EXPECT_EQ(self_kerr(0.0, d), 0.0);
    EXPECT_NEAR(self_kerr(g, 3.8 * g), g / 54.872, 1e-12 * g);
    EXPECT_THROW(self_kerr(g, 0.0), DomainError);
}

TEST(DispersiveCoefficients, SumIdentityAndDressedFrequency) {
    const DeviceParams p;
    const auto c = dispersive_coefficients(p);
    EXPECT_GT(c.chi, 0.0);
    EXPECT_GT(c.delta, 0.0);
    const double g2d = p.g_qm * p.g_qm / p.detuning();
    EXPECT_NEAR(c.chi + c.delta, g2d, 1e-12 * g2d);
    EXPECT_NEAR(angular_to_hz(c.omega_m_dressed), 6.236e9, 0.5e6);
}

TEST(AutlerTownes, DressedFrequencyAndBranches) {
    const double ge = hz_to_angular(6.107e9);
    EXPECT_EQ(at_dressed_frequency(ge, 0.0), ge);
    EXPECT_NEAR(angular_to_hz(at_dressed_frequency(ge, hz_to_angular(76e6))), 6.145e9, 1.0);
    const auto [up, lo] = at_branches(ge, hz_to_angular(76e6));
    EXPECT_NEAR(angular_to_hz(up - lo), 76e6, 1e-3);
    EXPECT_NEAR(0.5 * (up + lo), ge, 1e-3);
}

TEST(JaynesCummings, UncoupledSpectrum) {
    DeviceParams p;
    p.g_qm = 0.0;
    const auto s = HilbertSpec::single(4);
    const auto h = jc_hamiltonian(p, s);
    EXPECT_TRUE(h.is_hermitian());
    for (int q = 0; q < 2; ++q) {
        for (int n = 0; n < 4; ++n) {
            const double expect = (q == 0 ? -0.5 : 0.5) * p.omega_q + n * p.omega_m;
            EXPECT_NEAR(h.matrix()(q * 4 + n, q * 4 + n).real(), expect, 1e-3);
        }
    }
    EXPECT_LE((h.matrix() - Matrix(h.matrix().diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(JaynesCummings, ResonantSplittingIsTwoG) {
    DeviceParams p;
    p.omega_q = p.omega_m;
    const auto h = jc_hamiltonian(p, HilbertSpec::single(6)).matrix();
    // One-excitation block {|+,0>, |g,1>} diagonalized by hand.
    const double a = h(6, 6).real(), d = h(1, 1).real();
    const double b = std::abs(h(6, 1));
    const double split = std::sqrt((a - d) * (a - d) + 4.0 * b * b);
    EXPECT_NEAR(split, 2.0 * p.g_qm, 1e-6 * p.g_qm);
}

TEST(JaynesCummings, ConservesExcitationNumber) {
    const DeviceParams p;
    const auto s = HilbertSpec::single(8);
    const auto h = jc_hamiltonian(p, s);
    const auto nq = qm(sigma_plus() * sigma_minus(), identity(s));
    const auto nm = qm(identity(qubit_space()), number(s));
    const Matrix tot = (nq + nm).matrix();
    const Matrix comm = h.matrix() * tot - tot * h.matrix();
    EXPECT_LE(comm.cwiseAbs().maxCoeff(), 1e-10 * h.matrix().cwiseAbs().maxCoeff());
}

TEST(Dispersive, DiagonalGroundManifoldMatchesKerrForm) {
    const DeviceParams p;
    const auto c = dispersive_coefficients(p);
    const auto s = HilbertSpec::single(8);
    const auto h = dispersive_hamiltonian(p, c, s);
    EXPECT_TRUE(h.is_hermitian());
    EXPECT_EQ((h.matrix() - Matrix(h.matrix().diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
    const double offset = -(p.omega_q - c.chi) / 2.0;
    EXPECT_NEAR(h.matrix()(0, 0).real(), offset, 1e-6);
    for (int n = 0; n < 8; ++n) {
        const double kerr = (p.omega_m + c.chi + c.delta) * n - c.delta * n * n;
        EXPECT_NEAR(h.matrix()(n, n).real() - offset, kerr, 1e-6 * std::max(1.0, kerr));
    }
}

TEST(Dispersive, GuardDiagnostic) {
    DeviceParams p;
    p.omega_q = p.omega_m - 2.0 * p.g_qm;
    Diagnostics diag;
    dispersive_hamiltonian(p, dispersive_coefficients(p), HilbertSpec::single(4), &diag);
    EXPECT_EQ(diag.size(), 1u);
}

TEST(Dispersive, SpectrumAgreesWithJaynesCummingsToSixthOrder) {
    // Levels measured from each model's ground: the dispersive form carries a
    // global chi/2 shift of the ground state, which is not physical.
    for (double ratio : {3.8, 5.0, 10.0}) {
        DeviceParams p;
        p.omega_q = p.omega_m - ratio * p.g_qm;
        const auto s = HilbertSpec::single(12);
        const auto ej = spectrum(jc_hamiltonian(p, s));
        const auto ed = spectrum(dispersive_hamiltonian(p, dispersive_coefficients(p), s));
        const double d = ratio * p.g_qm;
        const double order = std::pow(p.g_qm, 6) / std::pow(d, 5);
        for (int k = 1; k < 6; ++k) {
            EXPECT_LE(std::abs((ej(k) - ej(0)) - (ed(k) - ed(0))), 100.0 * order) << "ratio " << ratio << " level " << k;
        }
    }
}

TEST(Dispersive, RelativeErrorFallsWithDetuning) {
    double prev = dispersive_vs_jc(3.8);
    for (double r : {4.5, 5.5, 6.5, 7.5, 8.5, 10.0}) {
        const double cur = dispersive_vs_jc(r);
        EXPECT_LT(cur, prev) << "ratio " << r;
        prev = cur;
    }
}

TEST(EffectiveKerr, Frames) {
    const DeviceParams p;
    const auto c = dispersive_coefficients(p);
    const auto s = HilbertSpec::single(6);
    const auto rot = effective_kerr_hamiltonian(c, s, Frame::rotating);
    EXPECT_EQ(rot.matrix()(0, 0), Complex(0.0));
    for (int n = 0; n < 6; ++n) EXPECT_NEAR(rot.matrix()(n, n).real(), -c.delta * n * n, 1e-9);
    const auto lab = effective_kerr_hamiltonian(c, s, Frame::lab);
    EXPECT_NEAR(lab.matrix()(1, 1).real(), c.omega_m_dressed - c.delta, 1e-3);
}

TEST(Raman, CouplingAndDriveFrequency) {
    const double g0 = hz_to_angular(1e6);
    EXPECT_EQ(raman_coupling(g0, 0), g0);
    EXPECT_NEAR(raman_coupling(g0, 1), g0 * std::sqrt(2.0), 1e-9);
    EXPECT_THROW(raman_coupling(g0, -1), DomainError);
    EXPECT_NEAR(angular_to_hz(raman_drive_frequency(DeviceParams{})), (2 * 6.107 - 0.249 - 6.231) * 1e9, 1.0);
}

TEST(Cooperativity, ValueAndScaling) {
    const double g = hz_to_angular(20e6), gm = hz_to_angular(1.10e6), gq = hz_to_angular(0.1455e6);
    const double c = cooperativity(g, gq, gm);
    EXPECT_NEAR(c, 4.0 * 400.0 / (1.10 * 0.1455), 1e-6 * c);
    EXPECT_NEAR(c, 1.0e4, 0.01e4);
    EXPECT_NEAR(cooperativity(2 * g, gq, gm), 4 * c, 1e-9 * c);
    EXPECT_NEAR(cooperativity(g, 2 * gq, gm), c / 2, 1e-9 * c);
    EXPECT_THROW(cooperativity(g, 0.0, gm), DomainError);
}

TEST(ThermalOccupation, ReferenceValueAndLimits) {
    const double n = thermal_occupation(hz_to_angular(6.231e9), 0.020);
    EXPECT_NEAR(n, 3.2e-7, 0.05 * 3.2e-7);
    // hbar w / kB T = ln 2 -> 1.
    const double w = 1e10;
    const double t_ln2 = kHbar * w / (kBoltzmann * std::log(2.0));
    EXPECT_NEAR(thermal_occupation(w, t_ln2), 1.0, 1e-12);
    const double t_hot = kHbar * w / (kBoltzmann * 0.01);
    EXPECT_NEAR(thermal_occupation(w, t_hot), 100.0, 0.01 * 100.0);
    EXPECT_THROW(thermal_occupation(0.0, 1.0), DomainError);
    EXPECT_THROW(thermal_occupation(1.0, -1.0), DomainError);
}

TEST(Operators, QubitOperatorsAreHermitianWhereExpected) {
    EXPECT_TRUE(sigma_z().is_hermitian());
    EXPECT_TRUE(qubit_excited_projector().is_hermitian());
    const Matrix comm = sigma_plus().matrix() * sigma_minus().matrix() - sigma_minus().matrix() * sigma_plus().matrix();
    EXPECT_LE((comm - sigma_z().matrix()).cwiseAbs().maxCoeff(), 0.0);
}
