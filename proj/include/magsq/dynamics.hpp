#pragma once

// Lindblad dynamics and the protocol runners built on it.
//
//   drho/dt = -i[H, rho] + sum_k gamma_k (L_k rho L_k^dag - {L_k^dag L_k, rho}/2)
//
// integrated with fixed-step classical RK4. Time-dependent Hamiltonians are
// H(t) = H0 + f(t) H1 with f held constant across each step.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "magsq/analysis.hpp"
#include "magsq/error.hpp"
#include "magsq/fock.hpp"
#include "magsq/model.hpp"

namespace magsq {

struct CollapseOperator {
    ModeOperator op;
    double rate = 0.0;
};

class LindbladModel {
public:
    using Envelope = std::function<double(double)>;

    explicit LindbladModel(ModeOperator hamiltonian, std::vector<CollapseOperator> collapse = {})
        : h0_(std::move(hamiltonian)), collapse_(std::move(collapse)) {
        validate();
    }

    /// `envelope_bound` must bound |envelope(t)| over the run; it feeds the step guard.
    LindbladModel(ModeOperator hamiltonian, ModeOperator drive, Envelope envelope, double envelope_bound,
                  std::vector<CollapseOperator> collapse = {})
        : h0_(std::move(hamiltonian)), drive_(std::move(drive)), envelope_(std::move(envelope)),
          envelope_bound_(std::abs(envelope_bound)), collapse_(std::move(collapse)) {
        if (!envelope_) throw DomainError("LindbladModel: empty envelope");
        validate();
    }

    const HilbertSpec& space() const noexcept { return h0_.space(); }
    const ModeOperator& static_hamiltonian() const noexcept { return h0_; }
    const std::optional<ModeOperator>& drive() const noexcept { return drive_; }
    const std::vector<CollapseOperator>& collapse_ops() const noexcept { return collapse_; }

    double envelope(double t) const { return drive_ ? envelope_(t) : 0.0; }
    double envelope_bound() const noexcept { return drive_ ? envelope_bound_ : 0.0; }

    ModeOperator hamiltonian_at(double t) const {
        if (!drive_) return h0_;
        return h0_ + envelope_(t) * *drive_;
    }

    double max_rate() const {
        double r = 0.0;
        for (const auto& c : collapse_) r = std::max(r, c.rate);
        return r;
    }

private:
    void validate() const {
        if (!h0_.is_hermitian()) throw DomainError("LindbladModel: Hamiltonian is not Hermitian");
        if (drive_) {
            if (!(drive_->space() == h0_.space())) throw ShapeError("LindbladModel: drive space mismatch");
            if (!drive_->is_hermitian()) throw DomainError("LindbladModel: drive term is not Hermitian");
        }
        for (const auto& c : collapse_) {
            if (!(c.op.space() == h0_.space())) throw ShapeError("LindbladModel: collapse operator space mismatch");
            if (!(c.rate >= 0.0)) throw DomainError("LindbladModel: negative collapse rate");
        }
    }

    ModeOperator h0_;
    std::optional<ModeOperator> drive_;
    Envelope envelope_;
    double envelope_bound_ = 0.0;
    std::vector<CollapseOperator> collapse_;
};

struct SampleDiagnostics {
    double trace_deviation = 0.0;
    double min_eigenvalue = 0.0;
};

struct EvolutionResult {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    std::vector<SampleDiagnostics> diagnostics;
    double step = 0.0;  // largest step actually used

    const DensityMatrix& final_state() const { return states.back(); }

    double max_trace_deviation() const {
        double m = 0.0;
        for (const auto& d : diagnostics) m = std::max(m, d.trace_deviation);
        return m;
    }
    double min_eigenvalue() const {
        double m = 1.0;
        for (const auto& d : diagnostics) m = std::min(m, d.min_eigenvalue);
        return m;
    }
};

namespace detail {

inline double spectral_norm_hermitian(const Matrix& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Precomputed pieces of the Lindblad generator.
class Liouvillian {
public:
    explicit Liouvillian(const LindbladModel& model) {
        const int d = model.space().dim();
        Matrix damping = Matrix::Zero(d, d);
        for (const auto& c : model.collapse_ops()) {
            if (c.rate == 0.0) continue;
            jumps_.push_back(std::sqrt(c.rate) * c.op.matrix());
            damping += c.rate * c.op.matrix().adjoint() * c.op.matrix();
        }
        // K = -iH - (1/2) sum gamma L^dag L, so drho = K rho + (K rho)^dag + jumps.
        k0_ = -kI * model.static_hamiltonian().matrix() - 0.5 * damping;
        if (model.drive()) k1_ = -kI * model.drive()->matrix();
        scratch_.resize(d, d);
    }

    void set_envelope(double f) {
        if (k1_.size() == 0) {
            k_ = k0_;
        } else {
            k_ = k0_ + f * k1_;
        }
    }

    void apply(const Matrix& rho, Matrix& out) {
        scratch_.noalias() = k_ * rho;
        out = scratch_ + scratch_.adjoint();
        for (const auto& l : jumps_) {
            scratch_.noalias() = l * rho;
            out.noalias() += scratch_ * l.adjoint();
        }
    }

private:
    Matrix k0_, k1_, k_, scratch_;
    std::vector<Matrix> jumps_;
};

class Rk4 {
public:
    explicit Rk4(int d) : k1_(d, d), k2_(d, d), k3_(d, d), k4_(d, d), tmp_(d, d) {}

    void step(Liouvillian& gen, Matrix& rho, double dt) {
        gen.apply(rho, k1_);
        tmp_ = rho + (0.5 * dt) * k1_;
        gen.apply(tmp_, k2_);
        tmp_ = rho + (0.5 * dt) * k2_;
        gen.apply(tmp_, k3_);
        tmp_ = rho + dt * k3_;
        gen.apply(tmp_, k4_);
        rho += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    }

private:
    Matrix k1_, k2_, k3_, k4_, tmp_;
};

inline DensityMatrix sample_state(const HilbertSpec& space, Matrix& rho, SampleDiagnostics& diag) {
    rho = 0.5 * (rho + rho.adjoint());
    DensityMatrix out(space, rho);
    diag.trace_deviation = out.trace_deviation();
    diag.min_eigenvalue = out.min_eigenvalue();
    return out;
}

}  // namespace detail

/// Largest step allowed by the stability guard: 1 / (50 max(||H||, max rate)).
/// For driven models ||H|| is bounded by ||H0|| + |f|_max ||H1||.
inline double max_stable_step(const LindbladModel& model) {
    double norm = detail::spectral_norm_hermitian(model.static_hamiltonian().matrix());
    if (model.drive()) norm += model.envelope_bound() * detail::spectral_norm_hermitian(model.drive()->matrix());
    const double scale = std::max(norm, model.max_rate());
    if (scale == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (50.0 * scale);
}

/// One RK4 step from t to t + dt. Throws StepSizeError if dt violates the guard.
inline DensityMatrix lindblad_step(const LindbladModel& model, const DensityMatrix& rho, double t, double dt) {
    if (!(rho.space() == model.space())) throw ShapeError("lindblad_step: state and model spaces differ");
    if (!(dt > 0.0)) throw StepSizeError("lindblad_step: dt must be positive");
    const double f = model.envelope(t);
    if (dt > max_stable_step(model)) throw StepSizeError("lindblad_step: dt exceeds the stability guard");
    detail::Liouvillian gen(model);
    gen.set_envelope(f);
    detail::Rk4 rk(model.space().dim());
    Matrix m = rho.matrix();
    rk.step(gen, m, dt);
    m = 0.5 * (m + m.adjoint());
    return {rho.space(), std::move(m)};
}

struct IntegratorSettings {
    /// Upper bound on the step; unset means the stability limit. The actual
    /// step is snapped down so every sample instant lies on the step grid.
    std::optional<double> dt;
};

/// Integrates to each instant in `times` (strictly increasing, first >= 0).
/// The initial state is recorded when times.front() == 0.
inline EvolutionResult evolve_to(const LindbladModel& model, const DensityMatrix& rho0,
                                 const std::vector<double>& times, IntegratorSettings settings = {}) {
    if (!(rho0.space() == model.space())) throw ShapeError("evolve: state and model spaces differ");
    if (times.empty()) throw DomainError("evolve: no sample times");
    if (times.front() < 0.0) throw DomainError("evolve: negative sample time");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw DomainError("evolve: sample times must be strictly increasing");

    const double guard = max_stable_step(model);
    double dt_max = guard;
    if (settings.dt) {
        if (!(*settings.dt > 0.0)) throw StepSizeError("evolve: dt must be positive");
        if (*settings.dt > guard) {
            throw StepSizeError("evolve: dt " + std::to_string(*settings.dt) + " exceeds stability guard " +
                                std::to_string(guard));
        }
        dt_max = *settings.dt;
    }

    EvolutionResult out;
    detail::Liouvillian gen(model);
    detail::Rk4 rk(model.space().dim());
    Matrix rho = rho0.matrix();
    double t = 0.0;
    for (double target : times) {
        const double span = target - t;
        if (span > 0.0) {
            const auto steps = std::max<long>(1, static_cast<long>(std::ceil(span / dt_max - 1e-9)));
            const double dt = span / static_cast<double>(steps);
            out.step = std::max(out.step, dt);
            for (long s = 0; s < steps; ++s) {
                const double ts = t + s * dt;
                gen.set_envelope(model.envelope(ts));
                rk.step(gen, rho, dt);
            }
            t = target;
        }
        SampleDiagnostics d;
        out.states.push_back(detail::sample_state(model.space(), rho, d));
        out.times.push_back(target);
        out.diagnostics.push_back(d);
    }
    return out;
}

/// Samples at t_k = k duration / samples, k = 0..samples.
inline EvolutionResult evolve(const LindbladModel& model, const DensityMatrix& rho0, double duration, int samples,
                              IntegratorSettings settings = {}) {
    if (!(duration > 0.0)) throw DomainError("evolve: duration must be positive");
    if (samples < 1) throw DomainError("evolve: need at least one sample");
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(samples) + 1);
    for (int k = 0; k <= samples; ++k) times.push_back(duration * k / samples);
    return evolve_to(model, rho0, times, settings);
}

/// U(t) = exp[i delta (a^dag a)^2 t], diagonal.
inline ModeOperator kerr_unitary(double delta, double t, const HilbertSpec& space) {
    detail::require_single(space, "kerr_unitary");
    Matrix u = Matrix::Zero(space.dim(), space.dim());
    for (int n = 0; n < space.dim(); ++n) u(n, n) = std::polar(1.0, delta * n * n * t);
    return {space, std::move(u)};
}

// ---------------------------------------------------------------------------
// Protocols

struct SimulationSettings {
    int dim = 20;
    IntegratorSettings integrator{};
    /// Drive phase; only rotates the squeezing axis.
    double drive_phase = 0.0;
};

/// H = -delta n^2 + eps (a e^{i phi} + a^dag e^{-i phi}), loss (a, gamma_m);
/// rotating frame at the dressed magnon frequency.
inline LindbladModel squeezing_model(const DeviceParams& p, const SimulationSettings& s) {
    const auto space = HilbertSpec::single(s.dim);
    const auto c = dispersive_coefficients(p);
    const auto a = annihilation(space);
    const Complex e = std::polar(1.0, s.drive_phase);
    const ModeOperator drive{space, p.drive_eps * (e * a.matrix() + std::conj(e) * a.matrix().adjoint())};
    return LindbladModel(effective_kerr_hamiltonian(c, space, Frame::rotating) + drive, {{a, p.gamma_m}});
}

/// H = -delta_hold n^2, loss (a, gamma_m), no drive.
inline LindbladModel decay_model(const DeviceParams& p, double delta_hold, int dim) {
    const auto space = HilbertSpec::single(dim);
    DispersiveCoefficients c;
    c.delta = delta_hold;
    return LindbladModel(effective_kerr_hamiltonian(c, space, Frame::rotating), {{annihilation(space), p.gamma_m}});
}

/// Magnon state after a squeezing pulse of length tau, started from vacuum.
inline DensityMatrix run_squeezing_protocol(const DeviceParams& p, double tau, const SimulationSettings& s = {}) {
    if (tau < 0.0) throw DomainError("run_squeezing_protocol: negative duration");
    const auto space = HilbertSpec::single(s.dim);
    if (tau == 0.0) return DensityMatrix::vacuum(space);
    return evolve_to(squeezing_model(p, s), DensityMatrix::vacuum(space), {tau}, s.integrator).final_state();
}

/// States at each pulse length in `taus` (sorted ascending). A constant drive
/// switched on at t = 0 makes every tau a point on one trajectory.
inline EvolutionResult run_squeezing_sweep(const DeviceParams& p, std::vector<double> taus,
                                           const SimulationSettings& s = {}) {
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    if (taus.empty() || taus.front() < 0.0) throw DomainError("run_squeezing_sweep: invalid tau list");
    return evolve_to(squeezing_model(p, s), DensityMatrix::vacuum(HilbertSpec::single(s.dim)), taus, s.integrator);
}

/// Free (delta_hold = 0) or Kerr-preserved evolution of rho0 for tau_w.
inline EvolutionResult run_decay_protocol(const DensityMatrix& rho0, const DeviceParams& p, double delta_hold,
                                          double tau_w, int samples = 40, IntegratorSettings settings = {}) {
    if (tau_w < 0.0) throw DomainError("run_decay_protocol: negative waiting time");
    const auto model = decay_model(p, delta_hold, rho0.dim());
    if (tau_w == 0.0) return evolve_to(model, rho0, {0.0}, settings);
    return evolve(model, rho0, tau_w, samples, settings);
}

struct RamanTrace {
    std::vector<double> times;
    std::vector<double> population;  // P_{|f, n_start>}(t)
};

/// Resonant swap H = g0 (|f><g| (x) a + |g><f| (x) a^dag) from |f, n_start>.
/// Coherent dynamics only, propagated with the exact sample-interval unitary.
inline RamanTrace run_raman_swap(double g0, int n_start, double duration, int samples, int magnon_dim = 20) {
    if (!(g0 > 0.0)) throw DomainError("run_raman_swap: g0 must be positive");
    if (n_start < 0) throw DomainError("run_raman_swap: negative Fock index");
    if (samples < 2 || !(duration > 0.0)) throw DomainError("run_raman_swap: need duration > 0 and samples >= 2");
    const int dm = std::max(magnon_dim, n_start + 2);
    const auto mspace = HilbertSpec::single(dm);
    const auto a = annihilation(mspace);
    // Two-level {g, f}, index 0 = g.
    const auto raise = sigma_plus();  // |f><g|
    const ModeOperator h = g0 * (qm(raise, a) + qm(raise.adjoint(), a.adjoint()));

    const int start = 1 * dm + n_start;
    const double dt = duration / (samples - 1);
    const Matrix u = matrix_exponential(Matrix(-kI * dt * h.matrix()));
    Vector psi = Vector::Zero(2 * dm);
    psi(start) = 1.0;

    RamanTrace out;
    out.times.reserve(static_cast<std::size_t>(samples));
    out.population.reserve(static_cast<std::size_t>(samples));
    for (int k = 0; k < samples; ++k) {
        out.times.push_back(k * dt);
        out.population.push_back(std::norm(psi(start)));
        psi = u * psi;
    }
    return out;
}

struct FullModelCheck {
    DensityMatrix full_reduced;
    DensityMatrix kerr;
    double trace_distance = 0.0;
    double max_excited_population = 0.0;
};

/// Drives the magnon for tau under the qubit (x) magnon JC model (qubit in g,
/// loss on both) and under the reduced Kerr model, in a frame rotating at the
/// dressed magnon frequency.
inline FullModelCheck run_full_model_check(const DeviceParams& p, double tau, const SimulationSettings& s = {},
                                           int samples = 30, Diagnostics* diag = nullptr) {
    if (!(tau > 0.0)) throw DomainError("run_full_model_check: tau must be positive");
    warn_if(diag, p.detuning() < 3.0 * p.g_qm, "run_full_model_check: detuning below 3 g_qm");
    const auto mspace = HilbertSpec::single(s.dim);
    const auto c = dispersive_coefficients(p);
    const double frame = c.omega_m_dressed;

    const auto iq = identity(qubit_space());
    const auto im = identity(mspace);
    const auto a = annihilation(mspace);
    const Complex e = std::polar(1.0, s.drive_phase);
    const ModeOperator drive{mspace, p.drive_eps * (e * a.matrix() + std::conj(e) * a.matrix().adjoint())};
    const ModeOperator h = 0.5 * (p.omega_q - frame) * qm(sigma_z(), im) +
                           (p.omega_m - frame) * qm(iq, number(mspace)) +
                           p.g_qm * (qm(sigma_plus(), a) + qm(sigma_minus(), a.adjoint())) + qm(iq, drive);
    std::vector<CollapseOperator> collapse{{qm(iq, a), p.gamma_m}};
    if (p.gamma_q > 0.0) collapse.push_back({qm(sigma_minus(), im), p.gamma_q});
    const LindbladModel full(h, std::move(collapse));

    const auto ground = DensityMatrix::fock(qubit_space(), 0);
    const auto rho0 = tensor(ground, DensityMatrix::vacuum(mspace));
    const auto traj = evolve(full, rho0, tau, samples, s.integrator);

    const auto excited = qm(qubit_excited_projector(), im);
    double pe = 0.0;
    for (const auto& st : traj.states) pe = std::max(pe, expectation(st, excited).real());

    auto reduced = partial_trace(traj.final_state(), 1);
    auto kerr = run_squeezing_protocol(p, tau, s);
    const double td = magsq::trace_distance(reduced, kerr);
    return {std::move(reduced), std::move(kerr), td, pe};
}

// ---------------------------------------------------------------------------
// Convergence diagnostics

/// Scalars reported for every magnon state.
struct StateSummary {
    double v_min = 1.0;
    double v_max = 1.0;
    double theta_min = 0.0;
    double mean_n = 0.0;
};

inline StateSummary summarize(const DensityMatrix& rho) {
    const auto ext = variance_extrema(quadrature_covariance(rho));
    return {ext.v_min, ext.v_max, ext.theta_min, mean_magnon_number(rho)};
}

inline double max_summary_drift(const StateSummary& a, const StateSummary& b) {
    return std::max({std::abs(a.v_min - b.v_min), std::abs(a.v_max - b.v_max), std::abs(a.mean_n - b.mean_n)});
}

/// Re-runs a state-producing protocol at dim + 5 and reports the largest
/// change in (V_min, V_max, <n>) across the returned states.
template <class Runner>
double truncation_drift(Runner&& run_at_dim, int dim) {
    const std::vector<DensityMatrix> base = run_at_dim(dim);
    const std::vector<DensityMatrix> refined = run_at_dim(dim + 5);
    if (base.size() != refined.size()) throw ShapeError("truncation_drift: runs returned different sample counts");
    double drift = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i)
        drift = std::max(drift, max_summary_drift(summarize(base[i]), summarize(refined[i])));
    return drift;
}

}  // namespace magsq
