#pragma once

// Truncated Fock-space states and operators.
//
// Composite spaces use Kronecker ordering with the leftmost factor as the
// most significant index: for factors {d0, d1}, basis index = i0 * d1 + i1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "magsq/error.hpp"

namespace magsq {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr Complex kI{0.0, 1.0};

/// Dimension of a truncated Hilbert space, optionally split into factors.
class HilbertSpec {
public:
    static HilbertSpec single(int dim) { return HilbertSpec(dim, {}); }

    static HilbertSpec composite(std::vector<int> factors) {
        if (factors.size() < 2) throw ShapeError("composite space needs at least two factors");
        int dim = 1;
        for (int f : factors) {
            if (f < 2) throw ShapeError("every factor dimension must be >= 2");
            dim *= f;
        }
        return HilbertSpec(dim, std::move(factors));
    }

    int dim() const noexcept { return dim_; }
    const std::vector<int>& factors() const noexcept { return factors_; }
    bool is_single() const noexcept { return factors_.empty(); }
    int num_factors() const noexcept { return is_single() ? 1 : static_cast<int>(factors_.size()); }
    int factor_dim(int k) const { return is_single() ? dim_ : factors_.at(static_cast<std::size_t>(k)); }

    friend bool operator==(const HilbertSpec&, const HilbertSpec&) = default;

private:
    HilbertSpec(int dim, std::vector<int> factors) : dim_(dim), factors_(std::move(factors)) {
        if (dim_ < 2) throw ShapeError("Hilbert space dimension must be >= 2, got " + std::to_string(dim_));
    }

    int dim_;
    std::vector<int> factors_;
};

namespace detail {

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline bool all_finite(const Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const Complex z = m.data()[i];
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

inline void require_square(const Matrix& m, int dim, const char* what) {
    if (m.rows() != dim || m.cols() != dim) {
        throw ShapeError(std::string(what) + ": expected " + std::to_string(dim) + "x" + std::to_string(dim) +
                         " matrix, got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

inline void require_single(const HilbertSpec& space, const char* what) {
    if (!space.is_single()) throw UnsupportedSpaceError(std::string(what) + " requires a single-mode space");
}

}  // namespace detail

/// Dense operator on a truncated space.
class ModeOperator {
public:
    ModeOperator(HilbertSpec space, Matrix entries) : space_(std::move(space)), m_(std::move(entries)) {
        detail::require_square(m_, space_.dim(), "ModeOperator");
    }

    const HilbertSpec& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return m_; }
    int dim() const noexcept { return space_.dim(); }

    ModeOperator adjoint() const { return {space_, m_.adjoint()}; }

    bool is_hermitian(double tol = 1e-10) const { return detail::max_abs(m_ - m_.adjoint()) <= tol; }

    friend ModeOperator operator*(const ModeOperator& a, const ModeOperator& b) {
        check_same(a, b);
        return {a.space_, a.m_ * b.m_};
    }
    friend ModeOperator operator+(const ModeOperator& a, const ModeOperator& b) {
        check_same(a, b);
        return {a.space_, a.m_ + b.m_};
    }
    friend ModeOperator operator-(const ModeOperator& a, const ModeOperator& b) {
        check_same(a, b);
        return {a.space_, a.m_ - b.m_};
    }
    friend ModeOperator operator*(Complex s, const ModeOperator& a) { return {a.space_, s * a.m_}; }
    friend ModeOperator operator*(double s, const ModeOperator& a) { return {a.space_, s * a.m_}; }

private:
    static void check_same(const ModeOperator& a, const ModeOperator& b) {
        if (!(a.space_ == b.space_)) throw ShapeError("operator spaces differ");
    }

    HilbertSpec space_;
    Matrix m_;
};

/// Normalized state vector.
class PureState {
public:
    PureState(HilbertSpec space, Vector amplitudes) : space_(std::move(space)), v_(std::move(amplitudes)) {
        if (v_.size() != space_.dim()) throw ShapeError("PureState: amplitude length does not match space");
        if (std::abs(v_.norm() - 1.0) > 1e-10) throw InvariantError("PureState: norm deviates from 1");
    }

    const HilbertSpec& space() const noexcept { return space_; }
    const Vector& amplitudes() const noexcept { return v_; }

private:
    HilbertSpec space_;
    Vector v_;
};

/// Tolerances for DensityMatrix validation.
struct StateTolerance {
    double hermitian = 1e-10;
    double trace = 1e-8;
    double min_eigenvalue = -1e-8;
};

/// Hermitian, unit-trace, positive-semidefinite state. Construction validates.
class DensityMatrix {
public:
    DensityMatrix(HilbertSpec space, Matrix entries, StateTolerance tol = {})
        : space_(std::move(space)), m_(std::move(entries)) {
        detail::require_square(m_, space_.dim(), "DensityMatrix");
        if (!detail::all_finite(m_)) throw NumericError("DensityMatrix: non-finite entries");
        if (detail::max_abs(m_ - m_.adjoint()) > tol.hermitian) throw InvariantError("DensityMatrix: not Hermitian");
        if (std::abs(m_.trace() - Complex(1.0)) > tol.trace) throw InvariantError("DensityMatrix: trace deviates from 1");
        min_eig_ = Eigen::SelfAdjointEigenSolver<Matrix>(m_, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
        if (min_eig_ < tol.min_eigenvalue) {
            throw InvariantError("DensityMatrix: negative eigenvalue " + std::to_string(min_eig_));
        }
    }

    explicit DensityMatrix(const PureState& psi)
        : DensityMatrix(psi.space(), psi.amplitudes() * psi.amplitudes().adjoint()) {}

    static DensityMatrix fock(const HilbertSpec& space, int n) {
        if (n < 0 || n >= space.dim()) throw DomainError("Fock index out of range");
        Matrix m = Matrix::Zero(space.dim(), space.dim());
        m(n, n) = 1.0;
        return {space, std::move(m)};
    }

    static DensityMatrix vacuum(const HilbertSpec& space) { return fock(space, 0); }

    static DensityMatrix maximally_mixed(const HilbertSpec& space) {
        return {space, Matrix::Identity(space.dim(), space.dim()) / static_cast<double>(space.dim())};
    }

    const HilbertSpec& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return m_; }
    int dim() const noexcept { return space_.dim(); }
    double min_eigenvalue() const noexcept { return min_eig_; }
    double trace_deviation() const { return std::abs(m_.trace() - Complex(1.0)); }
    double purity() const { return (m_ * m_).trace().real(); }

private:
    HilbertSpec space_;
    Matrix m_;
    double min_eig_ = 0.0;
};

// ---------------------------------------------------------------------------
// Elementary operators

inline ModeOperator identity(const HilbertSpec& space) {
    return {space, Matrix::Identity(space.dim(), space.dim())};
}

/// a|n> = sqrt(n)|n-1>.
inline ModeOperator annihilation(const HilbertSpec& space) {
    detail::require_single(space, "annihilation");
    Matrix m = Matrix::Zero(space.dim(), space.dim());
    for (int n = 1; n < space.dim(); ++n) m(n - 1, n) = std::sqrt(static_cast<double>(n));
    return {space, std::move(m)};
}

inline ModeOperator creation(const HilbertSpec& space) { return annihilation(space).adjoint(); }

inline ModeOperator number(const HilbertSpec& space) {
    detail::require_single(space, "number");
    Matrix m = Matrix::Zero(space.dim(), space.dim());
    for (int n = 0; n < space.dim(); ++n) m(n, n) = static_cast<double>(n);
    return {space, std::move(m)};
}

/// P = exp(i pi a^dag a) = diag((-1)^n).
inline ModeOperator parity(const HilbertSpec& space) {
    detail::require_single(space, "parity");
    Matrix m = Matrix::Zero(space.dim(), space.dim());
    for (int n = 0; n < space.dim(); ++n) m(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
    return {space, std::move(m)};
}

// ---------------------------------------------------------------------------
// Matrix exponential

namespace detail {

inline double hermitian_defect(const Matrix& g) { return max_abs(g - g.adjoint()); }
inline double anti_hermitian_defect(const Matrix& g) { return max_abs(g + g.adjoint()); }

inline Matrix exp_hermitian_phase(const Matrix& k, Complex factor) {
    // exp(factor * K) for Hermitian K.
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (k + k.adjoint()));
    const Eigen::VectorXd& w = es.eigenvalues();
    Vector e(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) e(i) = std::exp(factor * w(i));
    return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

/// Hermitian and anti-Hermitian generators go through an eigendecomposition
/// (unitary to rounding); anything else falls back to Pade scaling-and-squaring.
inline Matrix matrix_exponential(const Matrix& g) {
    if (g.rows() != g.cols()) throw ShapeError("matrix_exponential: matrix not square");
    if (!detail::all_finite(g)) throw NumericError("matrix_exponential: non-finite entries");
    const double scale = std::max(1.0, detail::max_abs(g));
    const double tol = 1e-13 * scale;
    if (detail::anti_hermitian_defect(g) <= tol) {
        // G = -iK with K = iG Hermitian.
        return detail::exp_hermitian_phase(kI * g, -kI);
    }
    if (detail::hermitian_defect(g) <= tol) return detail::exp_hermitian_phase(g, Complex(1.0));
    Matrix out = g.exp();
    if (!detail::all_finite(out)) throw NumericError("matrix_exponential: overflow");
    return out;
}

inline ModeOperator matrix_exponential(const ModeOperator& op) {
    return {op.space(), matrix_exponential(op.matrix())};
}

// ---------------------------------------------------------------------------
// Generated unitaries

/// D(alpha) = exp(alpha a^dag - alpha^* a). Warns when |alpha|^2 > dim/4.
inline ModeOperator displacement(const HilbertSpec& space, Complex alpha, Diagnostics* diag = nullptr) {
    detail::require_single(space, "displacement");
    warn_if(diag, std::norm(alpha) > space.dim() / 4.0,
            "displacement: |alpha|^2 exceeds dim/4, truncation error likely");
    const Matrix a = annihilation(space).matrix();
    return {space, matrix_exponential(Matrix(alpha * a.adjoint() - std::conj(alpha) * a))};
}

/// S = exp[(r/2)(e^{-i phi} a^2 - e^{i phi} a^dag^2)]. Warns when e^{2r} > dim/4.
inline ModeOperator squeeze(const HilbertSpec& space, double r, double phi, Diagnostics* diag = nullptr) {
    detail::require_single(space, "squeeze");
    warn_if(diag, std::exp(2.0 * std::abs(r)) > space.dim() / 4.0,
            "squeeze: e^{2r} exceeds dim/4, truncation error likely");
    const Matrix a = annihilation(space).matrix();
    const Matrix a2 = a * a;
    const Complex e = std::polar(1.0, phi);
    Matrix gen = (r / 2.0) * (std::conj(e) * a2 - e * a2.adjoint());
    return {space, matrix_exponential(gen)};
}

// ---------------------------------------------------------------------------
// Composite spaces

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Kronecker product; the leftmost operator is the most significant factor.
inline ModeOperator tensor(const std::vector<ModeOperator>& ops) {
    if (ops.size() < 2) throw ShapeError("tensor needs at least two operators");
    std::vector<int> factors;
    Matrix m = Matrix::Identity(1, 1);
    for (const auto& op : ops) {
        if (op.space().is_single()) {
            factors.push_back(op.dim());
        } else {
            factors.insert(factors.end(), op.space().factors().begin(), op.space().factors().end());
        }
        m = kron(m, op.matrix());
    }
    return {HilbertSpec::composite(std::move(factors)), std::move(m)};
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
    auto op = tensor({ModeOperator(a.space(), a.matrix()), ModeOperator(b.space(), b.matrix())});
    return {op.space(), op.matrix()};
}

/// Reduced state of factor `keep`, tracing out every other factor.
inline DensityMatrix partial_trace(const DensityMatrix& rho, int keep) {
    const HilbertSpec& space = rho.space();
    if (space.is_single()) throw ShapeError("partial_trace requires a composite space");
    const auto& f = space.factors();
    if (keep < 0 || keep >= static_cast<int>(f.size())) throw ShapeError("partial_trace: factor index out of range");

    const int dk = f[static_cast<std::size_t>(keep)];
    int inner = 1;
    for (std::size_t k = static_cast<std::size_t>(keep) + 1; k < f.size(); ++k) inner *= f[k];
    const int outer = space.dim() / (dk * inner);

    Matrix red = Matrix::Zero(dk, dk);
    const Matrix& m = rho.matrix();
    for (int o = 0; o < outer; ++o)
        for (int in = 0; in < inner; ++in)
            for (int i = 0; i < dk; ++i)
                for (int j = 0; j < dk; ++j)
                    red(i, j) += m((o * dk + i) * inner + in, (o * dk + j) * inner + in);
    red = 0.5 * (red + red.adjoint());
    return {HilbertSpec::single(dk), std::move(red)};
}

// ---------------------------------------------------------------------------
// States and measures

/// Coherent state from the Poisson amplitudes, renormalized on the truncated space.
inline PureState coherent_state(const HilbertSpec& space, Complex alpha) {
    detail::require_single(space, "coherent_state");
    Vector v(space.dim());
    Complex c = std::exp(-0.5 * std::norm(alpha));
    for (int n = 0; n < space.dim(); ++n) {
        v(n) = c;
        c *= alpha / std::sqrt(static_cast<double>(n + 1));
    }
    v.normalize();
    return {space, std::move(v)};
}

inline PureState fock_state(const HilbertSpec& space, int n) {
    if (n < 0 || n >= space.dim()) throw DomainError("Fock index out of range");
    Vector v = Vector::Zero(space.dim());
    v(n) = 1.0;
    return {space, std::move(v)};
}

/// Tr[rho op].
inline Complex expectation(const DensityMatrix& rho, const ModeOperator& op) {
    if (!(rho.space() == op.space())) throw ShapeError("expectation: state and operator spaces differ");
    // Tr[AB] = sum_ij A_ij B_ji
    return rho.matrix().cwiseProduct(op.matrix().transpose()).sum();
}

inline Complex expectation(const PureState& psi, const ModeOperator& op) {
    if (!(psi.space() == op.space())) throw ShapeError("expectation: state and operator spaces differ");
    return psi.amplitudes().dot(op.matrix() * psi.amplitudes());
}

/// U rho U^dag, re-Hermitized.
inline DensityMatrix conjugate(const DensityMatrix& rho, const ModeOperator& u) {
    if (!(rho.space() == u.space())) throw ShapeError("conjugate: spaces differ");
    Matrix m = u.matrix() * rho.matrix() * u.matrix().adjoint();
    return {rho.space(), 0.5 * (m + m.adjoint())};
}

namespace detail {

inline Matrix psd_sqrt(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
    Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * w.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

/// F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (!(rho.space() == sigma.space())) throw ShapeError("fidelity: spaces differ");
    const Matrix s = detail::psd_sqrt(rho.matrix());
    const Matrix inner = s * sigma.matrix() * s;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
    const double t = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return std::min(1.0, t * t);
}

/// (1/2) ||rho - sigma||_1.
inline double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (!(rho.space() == sigma.space())) throw ShapeError("trace_distance: spaces differ");
    const Matrix d = rho.matrix() - sigma.matrix();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

/// Embeds a single-mode state into a larger truncation (zero padding), or
/// truncates and renormalizes into a smaller one.
inline DensityMatrix resize(const DensityMatrix& rho, int new_dim) {
    detail::require_single(rho.space(), "resize");
    const int d = std::min(rho.dim(), new_dim);
    Matrix m = Matrix::Zero(new_dim, new_dim);
    m.topLeftCorner(d, d) = rho.matrix().topLeftCorner(d, d);
    const double tr = m.trace().real();
    if (tr <= 0.0) throw NumericError("resize: truncated state has no weight");
    m /= tr;
    return {HilbertSpec::single(new_dim), std::move(m)};
}

}  // namespace magsq
