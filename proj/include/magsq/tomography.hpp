#pragma once

// Wigner tomography: forward model, simulated parity measurement and
// constrained least-squares reconstruction.
//
// W(alpha) = (2/pi) Tr[D(-alpha) rho D(alpha) P] = Tr[rho Pi(alpha)] with the
// displaced parity Pi(alpha) = (2/pi) D(alpha) P D(alpha)^dag. Matrix elements
// of Pi are evaluated in closed form (associated Laguerre polynomials), so the
// forward model carries no truncation error from building D(alpha) itself.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "magsq/error.hpp"
#include "magsq/fock.hpp"
#include "magsq/parallel.hpp"

namespace magsq {

class PhaseSpaceGrid {
public:
    enum class Kind { cartesian, explicit_list };

    /// n x n points covering [-extent, extent]^2 in the alpha plane.
    static PhaseSpaceGrid cartesian(double extent, int n_per_axis) {
        if (!(extent > 0.0) || n_per_axis < 2) throw DomainError("PhaseSpaceGrid: need extent > 0 and >= 2 points");
        PhaseSpaceGrid g;
        g.kind_ = Kind::cartesian;
        g.extent_ = extent;
        g.n_axis_ = n_per_axis;
        g.step_ = 2.0 * extent / (n_per_axis - 1);
        g.points_.reserve(static_cast<std::size_t>(n_per_axis) * n_per_axis);
        for (int i = 0; i < n_per_axis; ++i)
            for (int j = 0; j < n_per_axis; ++j)
                g.points_.emplace_back(-extent + i * g.step_, -extent + j * g.step_);
        return g;
    }

    static PhaseSpaceGrid from_points(std::vector<Complex> points) {
        if (points.empty()) throw DomainError("PhaseSpaceGrid: no points");
        PhaseSpaceGrid g;
        g.kind_ = Kind::explicit_list;
        g.points_ = std::move(points);
        return g;
    }

    /// Default tomography grid: 21 x 21 over [-2.5, 2.5]^2.
    static PhaseSpaceGrid default_grid() { return cartesian(2.5, 21); }

    const std::vector<Complex>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    Kind kind() const noexcept { return kind_; }
    double extent() const noexcept { return extent_; }
    double step() const noexcept { return step_; }
    int points_per_axis() const noexcept { return n_axis_; }

    /// Area element per point (cartesian grids only).
    double cell_area() const {
        if (kind_ != Kind::cartesian) throw DomainError("PhaseSpaceGrid: cell area undefined for explicit grids");
        return step_ * step_;
    }

    /// Points with |alpha|^2 > dim/4.
    std::size_t guard_violations(int dim) const {
        std::size_t n = 0;
        for (const auto& a : points_)
            if (std::norm(a) > dim / 4.0) ++n;
        return n;
    }

private:
    PhaseSpaceGrid() = default;

    Kind kind_ = Kind::explicit_list;
    double extent_ = 0.0;
    double step_ = 0.0;
    int n_axis_ = 0;
    std::vector<Complex> points_;
};

/// (2/pi) D(alpha) P D(alpha)^dag restricted to the first `dim` Fock states.
/// For m >= n: <m|Pi|n> = (2/pi) (-1)^n sqrt(n!/m!) (2 alpha)^{m-n}
///                        e^{-2|alpha|^2} L_n^{(m-n)}(4|alpha|^2).
inline Matrix displaced_parity(int dim, Complex alpha) {
    if (dim < 2) throw ShapeError("displaced_parity: dim must be >= 2");
    Matrix out(dim, dim);
    const double r2 = std::norm(alpha);
    const double x = 4.0 * r2;
    const double log2r = r2 > 0.0 ? std::log(2.0 * std::sqrt(r2)) : 0.0;
    const double phase = std::arg(alpha);
    for (int k = 0; k < dim; ++k) {
        // Generalized Laguerre L_n^{(k)}(x) by forward recurrence:
        // n L_n = (2n - 1 + k - x) L_{n-1} - (n - 1 + k) L_{n-2}.
        double lag_prev = 0.0;
        double lag = 1.0;
        for (int n = 0; n + k < dim; ++n) {
            if (n > 0) {
                const double next = ((2.0 * n - 1.0 + k - x) * lag - (n - 1.0 + k) * lag_prev) / n;
                lag_prev = lag;
                lag = next;
            }
            const int m = n + k;
            Complex val;
            if (k > 0 && r2 == 0.0) {
                val = 0.0;
            } else {
                const double logmag = 0.5 * (std::lgamma(n + 1.0) - std::lgamma(m + 1.0)) + k * log2r - 2.0 * r2;
                const double sign = (n % 2 == 0) ? 1.0 : -1.0;
                val = (2.0 / kPi) * sign * std::exp(logmag) * lag * std::polar(1.0, k * phase);
            }
            out(m, n) = val;
            out(n, m) = std::conj(val);
        }
    }
    return out;
}

/// W(alpha) for one point; warns when |alpha|^2 > dim/4.
inline double wigner_point(const DensityMatrix& rho, Complex alpha, Diagnostics* diag = nullptr) {
    detail::require_single(rho.space(), "wigner_point");
    warn_if(diag, std::norm(alpha) > rho.dim() / 4.0, "wigner_point: |alpha|^2 exceeds dim/4");
    const Matrix pi = displaced_parity(rho.dim(), alpha);
    return rho.matrix().cwiseProduct(pi.transpose()).sum().real();
}

inline std::vector<double> wigner_grid(const DensityMatrix& rho, const PhaseSpaceGrid& grid, int threads = 1,
                                       Diagnostics* diag = nullptr) {
    detail::require_single(rho.space(), "wigner_grid");
    const std::size_t bad = grid.guard_violations(rho.dim());
    warn_if(diag, bad > 0, "wigner_grid: " + std::to_string(bad) + " points exceed |alpha|^2 <= dim/4");
    return parallel_map(grid.size(), threads, [&](std::size_t k) { return wigner_point(rho, grid.points()[k]); });
}

/// Finite-shot parity estimates of W. Each point draws `shots` binary parity
/// outcomes with p_even = (1 + (pi/2) W)/2 from its own generator seeded by
/// (seed, point index), so results do not depend on thread count.
inline std::vector<double> simulate_measurement(const DensityMatrix& rho, const PhaseSpaceGrid& grid, int shots,
                                                std::uint64_t seed, int threads = 1) {
    if (shots < 1) throw DomainError("simulate_measurement: shots must be >= 1");
    const auto exact = wigner_grid(rho, grid, threads);
    return parallel_map(grid.size(), threads, [&](std::size_t k) {
        double p = 0.5 * (1.0 + 0.5 * kPi * exact[k]);
        if (p < -1e-9 || p > 1.0 + 1e-9) throw ModelError("simulate_measurement: parity probability out of range");
        p = std::clamp(p, 0.0, 1.0);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(k)};
        std::mt19937_64 rng(seq);
        std::binomial_distribution<int> draw(shots, p);
        const int even = draw(rng);
        const double parity = 2.0 * even / shots - 1.0;
        return (2.0 / kPi) * parity;
    });
}

/// Linear map rho -> (W(alpha_k))_k, precomputed once per grid.
class WignerForwardModel {
public:
    WignerForwardModel(const PhaseSpaceGrid& grid, int dim, int threads = 1) : dim_(dim) {
        const auto d2 = static_cast<Eigen::Index>(dim) * dim;
        rows_.resize(static_cast<Eigen::Index>(grid.size()), d2);
        // Row k holds Pi_k^T in column-major order, so row . vec(rho) = Tr[rho Pi_k].
        auto blocks = parallel_map(grid.size(), threads, [&](std::size_t k) {
            Matrix t = displaced_parity(dim, grid.points()[k]).transpose();
            return Eigen::Map<const Eigen::RowVectorXcd>(t.data(), d2).eval();
        });
        for (std::size_t k = 0; k < blocks.size(); ++k) rows_.row(static_cast<Eigen::Index>(k)) = blocks[k];
    }

    int dim() const noexcept { return dim_; }
    Eigen::Index num_points() const noexcept { return rows_.rows(); }

    Eigen::VectorXd apply(const Matrix& rho) const {
        Eigen::Map<const Vector> v(rho.data(), rho.size());
        return (rows_ * v).real();
    }

    /// sum_k r_k Pi_k.
    Matrix adjoint(const Eigen::VectorXd& r) const {
        Vector g = rows_.adjoint() * r.cast<Complex>();
        return Eigen::Map<Matrix>(g.data(), dim_, dim_);
    }

private:
    int dim_;
    Matrix rows_;
};

struct ReconstructionOptions {
    int max_iterations = 5000;
    double relative_tolerance = 1e-10;
    int threads = 1;
};

struct TomographyResult {
    PhaseSpaceGrid grid;
    std::vector<double> measured;
    DensityMatrix rho_hat;
    double residual = 0.0;  // root-mean-square over grid points
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_history;
    Diagnostics diagnostics;
};

namespace detail {

struct CholeskyObjective {
    const WignerForwardModel& forward;
    const Eigen::VectorXd& target;

    struct Eval {
        double value = 0.0;
        Matrix rho;
        Eigen::VectorXd residual;
    };

    Eval evaluate(const Matrix& t) const {
        Eval e;
        Matrix a = t.adjoint() * t;
        const double tr = a.trace().real();
        e.rho = a / tr;
        e.residual = forward.apply(e.rho) - target;
        e.value = e.residual.squaredNorm();
        return e;
    }

    /// Gradient with respect to T (packed as d f/d Re T + i d f/d Im T),
    /// projected onto the lower triangle.
    Matrix gradient(const Matrix& t, const Eval& e) const {
        const Matrix g = 2.0 * forward.adjoint(e.residual);  // d f / d rho, Hermitian
        const double tr = (t.adjoint() * t).trace().real();
        const Complex grho = g.cwiseProduct(e.rho.transpose()).sum();
        Matrix h = (g - grho.real() * Matrix::Identity(g.rows(), g.cols())) / tr;
        h = 0.5 * (h + h.adjoint());
        Matrix out = 2.0 * t * h;
        return out.triangularView<Eigen::Lower>();
    }
};

inline double real_dot(const Matrix& a, const Matrix& b) { return (a.conjugate().cwiseProduct(b)).sum().real(); }

}  // namespace detail

/// Least-squares fit of W samples over rho = T^dag T / Tr(T^dag T), T lower
/// triangular. Steepest descent from the maximally mixed state; each step
/// starts from the Barzilai-Borwein length and backtracks until the Armijo
/// condition holds, so the objective never increases.
inline TomographyResult reconstruct(const std::vector<double>& measured, const PhaseSpaceGrid& grid, int dim,
                                    ReconstructionOptions opts = {}) {
    if (measured.size() != grid.size()) throw ShapeError("reconstruct: measured field and grid sizes differ");
    if (dim < 2) throw ShapeError("reconstruct: dim must be >= 2");
    Diagnostics diag;
    warn_if(&diag, grid.size() < static_cast<std::size_t>(dim) * dim,
            "reconstruct: fewer grid points than dim^2, problem is under-determined");
    const std::size_t bad = grid.guard_violations(dim);
    warn_if(&diag, bad > 0, "reconstruct: " + std::to_string(bad) + " points exceed |alpha|^2 <= dim/4");

    const WignerForwardModel forward(grid, dim, opts.threads);
    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(measured.data(), static_cast<Eigen::Index>(measured.size()));
    const detail::CholeskyObjective obj{forward, target};

    Matrix t = Matrix::Identity(dim, dim) / std::sqrt(static_cast<double>(dim));
    auto cur = obj.evaluate(t);
    Matrix grad = obj.gradient(t, cur);
    Matrix t_prev, grad_prev;
    std::vector<double> history{cur.value};
    bool converged = false;
    int it = 0;
    constexpr double kArmijo = 1e-4;

    for (; it < opts.max_iterations; ++it) {
        const double gnorm2 = detail::real_dot(grad, grad);
        if (cur.value == 0.0 || gnorm2 == 0.0) {
            converged = true;
            break;
        }
        double step = 1.0;
        if (it > 0) {
            const Matrix s = t - t_prev;
            const Matrix y = grad - grad_prev;
            const double sy = detail::real_dot(s, y);
            if (sy > 0.0) step = detail::real_dot(s, s) / sy;
        }
        Matrix t_new;
        detail::CholeskyObjective::Eval next;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            t_new = t - step * grad;
            next = obj.evaluate(t_new);
            if (std::isfinite(next.value) && next.value <= cur.value - kArmijo * step * gnorm2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No representable descent step left.
            converged = true;
            break;
        }
        const double rel = (cur.value - next.value) / cur.value;
        t_prev = std::move(t);
        grad_prev = std::move(grad);
        t = std::move(t_new);
        cur = std::move(next);
        grad = obj.gradient(t, cur);
        history.push_back(cur.value);
        if (rel < opts.relative_tolerance) {
            converged = true;
            ++it;
            break;
        }
    }
    if (!converged) diag.warn("reconstruct: iteration cap reached without convergence");

    Matrix rho = 0.5 * (cur.rho + cur.rho.adjoint());
    return TomographyResult{grid,
                            measured,
                            DensityMatrix(HilbertSpec::single(dim), std::move(rho)),
                            std::sqrt(cur.value / static_cast<double>(grid.size())),
                            it,
                            converged,
                            std::move(history),
                            std::move(diag)};
}

}  // namespace magsq
