#pragma once

// Squeezing metrology on density matrices.
//
// Quadratures use X = a + a^dag and P = -i(a - a^dag), so the vacuum variance
// of every X(theta) is exactly 1. Divide by 4 to reach the hbar/2 convention
// with x = (a + a^dag)/sqrt(2).

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <fftw3.h>

#include "magsq/error.hpp"
#include "magsq/fock.hpp"

namespace magsq {

/// X(theta) = cos(theta) X + sin(theta) P.
inline ModeOperator quadrature_operator(double theta, const HilbertSpec& space) {
    const Matrix a = annihilation(space).matrix();
    const Matrix x = a + a.adjoint();
    const Matrix p = -kI * (a - a.adjoint());
    return {space, std::cos(theta) * x + std::sin(theta) * p};
}

/// <X(theta)^2> - <X(theta)>^2.
inline double quadrature_variance(const DensityMatrix& rho, double theta) {
    const auto q = quadrature_operator(theta, rho.space());
    const double m1 = expectation(rho, q).real();
    const double m2 = expectation(rho, q * q).real();
    return m2 - m1 * m1;
}

/// Centered covariance of (X, P), symmetrized.
struct QuadratureCovariance {
    double xx = 0.0;
    double pp = 0.0;
    double xp = 0.0;
    double mean_x = 0.0;
    double mean_p = 0.0;

    double at(double theta) const {
        const double c = std::cos(theta), s = std::sin(theta);
        return xx * c * c + pp * s * s + 2.0 * xp * s * c;
    }
};

inline QuadratureCovariance quadrature_covariance(const DensityMatrix& rho) {
    const auto x = quadrature_operator(0.0, rho.space());
    const auto p = quadrature_operator(kPi / 2.0, rho.space());
    QuadratureCovariance c;
    c.mean_x = expectation(rho, x).real();
    c.mean_p = expectation(rho, p).real();
    c.xx = expectation(rho, x * x).real() - c.mean_x * c.mean_x;
    c.pp = expectation(rho, p * p).real() - c.mean_p * c.mean_p;
    c.xp = 0.5 * expectation(rho, x * p + p * x).real() - c.mean_x * c.mean_p;
    return c;
}

struct VarianceProfile {
    std::vector<double> thetas;
    std::vector<double> variances;
    double v_min = 1.0;
    double theta_min = 0.0;
    double v_max = 1.0;
    double theta_max = kPi / 2.0;
};

namespace detail {

inline double wrap_pi(double theta) {
    double t = std::fmod(theta, kPi);
    if (t < 0.0) t += kPi;
    if (t >= kPi) t -= kPi;
    return t;
}

}  // namespace detail

/// Extrema of V(theta), exact from the 2x2 covariance eigenproblem.
/// theta_min is reported in [0, pi); isotropic states report theta_min = 0.
inline VarianceProfile variance_extrema(const QuadratureCovariance& c) {
    VarianceProfile out;
    const double mean = 0.5 * (c.xx + c.pp);
    const double half_diff = 0.5 * (c.xx - c.pp);
    const double radius = std::hypot(half_diff, c.xp);
    out.v_min = mean - radius;
    out.v_max = mean + radius;
    if (radius < 1e-12) {
        out.theta_min = 0.0;
    } else {
        // V(theta) = mean + half_diff cos 2t + xp sin 2t, minimal where the
        // phase 2t sits opposite (half_diff, xp).
        out.theta_min = detail::wrap_pi(0.5 * std::atan2(-c.xp, -half_diff));
    }
    out.theta_max = detail::wrap_pi(out.theta_min + kPi / 2.0);
    return out;
}

/// Samples V on a uniform grid over [0, 2 pi) and attaches the analytic extrema.
inline VarianceProfile variance_profile(const DensityMatrix& rho, int n_theta) {
    if (n_theta < 8) throw DomainError("variance_profile: n_theta must be >= 8");
    const auto cov = quadrature_covariance(rho);
    VarianceProfile out = variance_extrema(cov);
    out.thetas.reserve(static_cast<std::size_t>(n_theta));
    out.variances.reserve(static_cast<std::size_t>(n_theta));
    for (int k = 0; k < n_theta; ++k) {
        const double t = kTwoPi * k / n_theta;
        out.thetas.push_back(t);
        out.variances.push_back(cov.at(t));
    }
    return out;
}

/// -10 log10(v_min).
inline double squeezing_db(double v_min) {
    if (!(v_min > 0.0)) throw DomainError("squeezing_db: variance must be positive");
    return -10.0 * std::log10(v_min);
}

/// sum_n n rho_nn, read straight off the diagonal.
inline double mean_magnon_number(const DensityMatrix& rho) {
    detail::require_single(rho.space(), "mean_magnon_number");
    double s = 0.0;
    for (int n = 0; n < rho.dim(); ++n) s += n * rho.matrix()(n, n).real();
    return s;
}

/// V(t) = 1 + (v0 - 1) e^{-gamma t}, the pure-loss relaxation of any quadrature variance.
inline double variance_relaxation_oracle(double v0, double gamma, double t) {
    if (gamma < 0.0) throw DomainError("variance_relaxation_oracle: negative rate");
    return 1.0 + (v0 - 1.0) * std::exp(-gamma * t);
}

struct ExponentialFit {
    double rate = 0.0;
    double amplitude = 0.0;
    double offset = 0.0;
    double residual = 0.0;  // root-mean-square

    double lifetime() const { return 1.0 / rate; }
};

/// Least-squares fit of A e^{-rate t} + offset with the offset held fixed.
/// Log-linear initial guess, then Levenberg-Marquardt on (A, rate).
inline ExponentialFit exponential_fit(std::span<const double> times, std::span<const double> values,
                                      double offset = 0.0) {
    if (times.size() != values.size()) throw ShapeError("exponential_fit: length mismatch");
    const std::size_t n = times.size();
    if (n < 4) throw DomainError("exponential_fit: need at least 4 points");

    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*hi - *lo <= 1e-14 * (1.0 + std::abs(*hi))) throw DegenerateFitError("exponential_fit: flat data");

    // Sign of the excursion from the offset; V_min relaxes from below.
    double sum = 0.0;
    for (double v : values) sum += v - offset;
    const double sign = sum >= 0.0 ? 1.0 : -1.0;

    const double t_scale = std::max(std::abs(*std::max_element(times.begin(), times.end())), 1e-300);

    // Log-linear least squares on points with a same-sign excursion.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = sign * (values[i] - offset);
        if (y <= 0.0) continue;
        const double x = times[i] / t_scale;
        const double ly = std::log(y);
        sx += x; sy += ly; sxx += x * x; sxy += x * ly;
        ++used;
    }
    if (used < 2) throw DegenerateFitError("exponential_fit: fewer than two usable points");
    const double denom = used * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) throw DegenerateFitError("exponential_fit: degenerate abscissae");
    double k = -(used * sxy - sx * sy) / denom;  // rate in scaled time
    double amp = sign * std::exp((sy + k * sx) / used);

    auto sse = [&](double A, double kk) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = offset + A * std::exp(-kk * times[i] / t_scale) - values[i];
            s += r * r;
        }
        return s;
    };

    double lambda = 1e-3;
    double cost = sse(amp, k);
    for (int it = 0; it < 500; ++it) {
        double jaa = 0, jak = 0, jkk = 0, ga = 0, gk = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = times[i] / t_scale;
            const double e = std::exp(-k * x);
            const double r = offset + amp * e - values[i];
            const double da = e;
            const double dk = -amp * x * e;
            jaa += da * da; jak += da * dk; jkk += dk * dk;
            ga += da * r; gk += dk * r;
        }
        bool improved = false;
        for (int tries = 0; tries < 30; ++tries) {
            const double a11 = jaa * (1.0 + lambda), a22 = jkk * (1.0 + lambda), a12 = jak;
            const double det = a11 * a22 - a12 * a12;
            if (std::abs(det) < 1e-300) { lambda *= 10.0; continue; }
            const double step_a = -(a22 * ga - a12 * gk) / det;
            const double step_k = -(a11 * gk - a12 * ga) / det;
            const double trial = sse(amp + step_a, k + step_k);
            if (trial < cost) {
                const double rel = (cost - trial) / std::max(cost, 1e-300);
                amp += step_a;
                k += step_k;
                cost = trial;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
    }

    ExponentialFit fit;
    fit.rate = k / t_scale;
    fit.amplitude = amp;
    fit.offset = offset;
    fit.residual = std::sqrt(cost / static_cast<double>(n));
    if (!std::isfinite(fit.rate) || !(fit.rate > 0.0)) {
        throw DegenerateFitError("exponential_fit: no decaying exponential fits the data");
    }
    return fit;
}

/// Dominant oscillation frequency (Hz) of a uniformly sampled real signal.
/// Mean removed, zero padded, peak refined by parabolic interpolation.
inline double dominant_frequency(std::span<const double> samples, double dt, int pad_factor = 16) {
    if (samples.size() < 4) throw DomainError("dominant_frequency: need at least 4 samples");
    if (!(dt > 0.0)) throw DomainError("dominant_frequency: dt must be positive");
    std::size_t len = 1;
    while (len < samples.size() * static_cast<std::size_t>(std::max(pad_factor, 1))) len <<= 1;

    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());

    std::vector<double> in(len, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) in[i] = samples[i] - mean;
    std::vector<fftw_complex> out(len / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(len), in.data(), out.data(), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    std::vector<double> mag(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
    std::size_t peak = 1;
    for (std::size_t k = 1; k < mag.size(); ++k)
        if (mag[k] > mag[peak]) peak = k;

    double shift = 0.0;
    if (peak > 0 && peak + 1 < mag.size()) {
        const double a = mag[peak - 1], b = mag[peak], c = mag[peak + 1];
        const double den = a - 2.0 * b + c;
        if (den != 0.0) shift = 0.5 * (a - c) / den;
    }
    return (static_cast<double>(peak) + shift) / (static_cast<double>(len) * dt);
}

}  // namespace magsq
