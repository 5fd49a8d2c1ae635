#pragma once

// Device parameters and Hamiltonian constructions for the qubit-magnon system.
//
// Everything inside the library is an angular frequency in rad/s. Conversion
// from/to Hz happens only at the config and report boundary (see io.hpp).

#include <cmath>
#include <string>
#include <utility>

#include "magsq/error.hpp"
#include "magsq/fock.hpp"

namespace magsq {

inline constexpr double kHbar = 1.054571817e-34;   // J s
inline constexpr double kBoltzmann = 1.380649e-23;  // J/K

constexpr double hz_to_angular(double hz) noexcept { return kTwoPi * hz; }
constexpr double angular_to_hz(double w) noexcept { return w / kTwoPi; }

struct DeviceParams {
    double omega_m = hz_to_angular(6.231e9);
    double omega_ge = hz_to_angular(6.107e9);
    double omega_ef = hz_to_angular(5.858e9);
    double eta = hz_to_angular(-249e6);
    double omega_c = hz_to_angular(6.364e9);
    double g_qm = hz_to_angular(20.0e6);
    double omega_AT = hz_to_angular(76e6);
    /// Stored directly; the first-order AT formula gives 6.145 GHz instead.
    double omega_q = hz_to_angular(6.155e9);
    double gamma_m = hz_to_angular(1.10e6);
    /// Inverted from C = 4 g^2 / (gamma_q gamma_m) = 1.0e4.
    double gamma_q = hz_to_angular(0.1455e6);
    /// Resonant magnon drive amplitude; default produced by the calibrate-drive job.
    double drive_eps = hz_to_angular(1.1359375e6);
    double kappa_c = hz_to_angular(0.73e6);

    double detuning() const noexcept { return omega_m - omega_q; }

    /// Throws DomainError if the anharmonicity or detuning sign is inconsistent.
    void validate() const {
        const double expect = omega_ef - omega_ge;
        if (std::abs(eta - expect) > 1e-6 * std::max(std::abs(expect), std::abs(eta))) {
            throw DomainError("DeviceParams: eta must equal omega_ef - omega_ge");
        }
        if (!(detuning() > 0.0)) throw DomainError("DeviceParams: requires omega_q < omega_m");
        if (g_qm < 0.0 || gamma_m < 0.0 || gamma_q < 0.0 || drive_eps < 0.0) {
            throw DomainError("DeviceParams: couplings, rates and drive must be non-negative");
        }
    }
};

struct DispersiveCoefficients {
    double chi = 0.0;
    double delta = 0.0;
    double omega_m_dressed = 0.0;
};

/// chi = g^2/d - g^4/d^3.
inline double dispersive_shift(double g, double d) {
    if (d == 0.0) throw DomainError("dispersive_shift: degenerate (zero) detuning");
    return g * g / d - std::pow(g, 4) / std::pow(d, 3);
}

/// delta = g^4/d^3.
inline double self_kerr(double g, double d) {
    if (d == 0.0) throw DomainError("self_kerr: degenerate (zero) detuning");
    return std::pow(g, 4) / std::pow(d, 3);
}

inline DispersiveCoefficients dispersive_coefficients(const DeviceParams& p) {
    DispersiveCoefficients c;
    c.chi = dispersive_shift(p.g_qm, p.detuning());
    c.delta = self_kerr(p.g_qm, p.detuning());
    c.omega_m_dressed = p.omega_m + c.chi + c.delta;
    return c;
}

/// First-order dressed qubit frequency omega_ge + Omega_AT/2.
inline double at_dressed_frequency(double omega_ge, double omega_AT) {
    if (omega_AT < 0.0) throw DomainError("at_dressed_frequency: negative Rabi amplitude");
    return omega_ge + 0.5 * omega_AT;
}

/// Upper and lower Autler-Townes branches (first order).
inline std::pair<double, double> at_branches(double omega_ge, double omega_AT) {
    if (omega_AT < 0.0) throw DomainError("at_branches: negative Rabi amplitude");
    return {omega_ge + 0.5 * omega_AT, omega_ge - 0.5 * omega_AT};
}

// Two-level operators in the {g, +} basis, index 0 = g.
inline HilbertSpec qubit_space() { return HilbertSpec::single(2); }

inline ModeOperator sigma_z() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = -1.0;
    m(1, 1) = 1.0;
    return {qubit_space(), std::move(m)};
}

/// sigma_+ = |+><g|.
inline ModeOperator sigma_plus() {
    Matrix m = Matrix::Zero(2, 2);
    m(1, 0) = 1.0;
    return {qubit_space(), std::move(m)};
}

inline ModeOperator sigma_minus() { return sigma_plus().adjoint(); }

/// |e><e| projector on the excited level.
inline ModeOperator qubit_excited_projector() {
    Matrix m = Matrix::Zero(2, 2);
    m(1, 1) = 1.0;
    return {qubit_space(), std::move(m)};
}

/// Lifts a qubit operator and a magnon operator to qubit (x) magnon.
inline ModeOperator qm(const ModeOperator& q, const ModeOperator& m) { return tensor({q, m}); }

/// (w_q/2) sz + w_m a^dag a + g (s+ a + s- a^dag) on qubit (x) magnon.
inline ModeOperator jc_hamiltonian(const DeviceParams& p, const HilbertSpec& magnon_space) {
    detail::require_single(magnon_space, "jc_hamiltonian");
    const auto iq = identity(qubit_space());
    const auto im = identity(magnon_space);
    const auto a = annihilation(magnon_space);
    return 0.5 * p.omega_q * qm(sigma_z(), im) + p.omega_m * qm(iq, number(magnon_space)) +
           p.g_qm * (qm(sigma_plus(), a) + qm(sigma_minus(), a.adjoint()));
}

/// (w_m + delta) n + delta n^2 sz + [w_q - 2 chi (n + 1/2)] sz / 2, diagonal in
/// the product Fock basis. Warns when the detuning drops below 3 g.
inline ModeOperator dispersive_hamiltonian(const DeviceParams& p, const DispersiveCoefficients& c,
                                           const HilbertSpec& magnon_space, Diagnostics* diag = nullptr) {
    detail::require_single(magnon_space, "dispersive_hamiltonian");
    warn_if(diag, p.detuning() < 3.0 * p.g_qm, "dispersive_hamiltonian: detuning below 3 g_qm");
    const int d = magnon_space.dim();
    Matrix h = Matrix::Zero(2 * d, 2 * d);
    for (int q = 0; q < 2; ++q) {
        const double sz = q == 0 ? -1.0 : 1.0;
        for (int n = 0; n < d; ++n) {
            const double nn = n;
            h(q * d + n, q * d + n) = (p.omega_m + c.delta) * nn + c.delta * nn * nn * sz +
                                      0.5 * (p.omega_q - 2.0 * c.chi * (nn + 0.5)) * sz;
        }
    }
    return {HilbertSpec::composite({2, d}), std::move(h)};
}

enum class Frame { lab, rotating };

/// Lab frame: w'_m n - delta n^2. Rotating at w'_m: -delta n^2.
inline ModeOperator effective_kerr_hamiltonian(const DispersiveCoefficients& c, const HilbertSpec& space,
                                               Frame frame) {
    detail::require_single(space, "effective_kerr_hamiltonian");
    Matrix h = Matrix::Zero(space.dim(), space.dim());
    const double w = frame == Frame::lab ? c.omega_m_dressed : 0.0;
    for (int n = 0; n < space.dim(); ++n) h(n, n) = w * n - c.delta * n * n;
    return {space, std::move(h)};
}

/// g_n = g0 sqrt(n + 1).
inline double raman_coupling(double g0, int n) {
    if (n < 0) throw DomainError("raman_coupling: negative Fock index");
    return g0 * std::sqrt(static_cast<double>(n) + 1.0);
}

/// w_d = 2 w_ge + eta - w_m.
inline double raman_drive_frequency(const DeviceParams& p) { return 2.0 * p.omega_ge + p.eta - p.omega_m; }

/// C = 4 g^2 / (gamma_q gamma_m).
inline double cooperativity(double g, double gamma_q, double gamma_m) {
    if (!(gamma_q > 0.0) || !(gamma_m > 0.0)) throw DomainError("cooperativity: rates must be positive");
    return 4.0 * g * g / (gamma_q * gamma_m);
}

/// Bose-Einstein occupancy 1/(exp(hbar w / kB T) - 1); omega in rad/s, T in K.
inline double thermal_occupation(double omega, double temperature) {
    if (!(omega > 0.0) || !(temperature > 0.0)) throw DomainError("thermal_occupation: inputs must be positive");
    return 1.0 / std::expm1(kHbar * omega / (kBoltzmann * temperature));
}

}  // namespace magsq
