#include <gtest/gtest.h>

#include <cmath>

#include "magsq/analysis.hpp"
#include "magsq/dynamics.hpp"

using namespace magsq;

namespace {

const std::vector<double> kFigureTaus{0.0, 50e-9, 100e-9, 150e-9, 200e-9, 250e-9};

LindbladModel pure_loss(int dim, double gamma) {
    const auto s = HilbertSpec::single(dim);
    return LindbladModel(ModeOperator(s, Matrix::Zero(dim, dim)), {{annihilation(s), gamma}});
}

double mean_n(const DensityMatrix& rho) { return expectation(rho, number(rho.space())).real(); }

}  // namespace

TEST(LindbladModel, RejectsNonHermitianAndNegativeRates) {
    const auto s = HilbertSpec::single(3);
    EXPECT_THROW(LindbladModel(annihilation(s)), DomainError);
    EXPECT_THROW(LindbladModel(number(s), {{annihilation(s), -1.0}}), DomainError);
}

TEST(LindbladStep, TrivialModelLeavesStateUnchanged) {
    const auto s = HilbertSpec::single(4);
    const LindbladModel m(ModeOperator(s, Matrix::Zero(4, 4)));
    const DensityMatrix rho(coherent_state(s, Complex(0.3, 0.1)));
    const auto out = lindblad_step(m, rho, 0.0, 1e-3);
    EXPECT_EQ((out.matrix() - rho.matrix()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LindbladStep, GuardViolationThrows) {
    const auto m = pure_loss(4, 1.0);
    const auto rho = DensityMatrix::fock(HilbertSpec::single(4), 1);
    EXPECT_NO_THROW(lindblad_step(m, rho, 0.0, max_stable_step(m)));
    EXPECT_THROW(lindblad_step(m, rho, 0.0, 1.01 * max_stable_step(m)), StepSizeError);
    EXPECT_THROW(evolve(m, rho, 1.0, 2, {1.0}), StepSizeError);
}

TEST(LindbladStep, TraceDriftPerStepIsTiny) {
    const DeviceParams p;
    const auto m = squeezing_model(p, {});
    auto rho = DensityMatrix::vacuum(HilbertSpec::single(20));
    const double dt = max_stable_step(m);
    for (int k = 0; k < 200; ++k) {
        const double before = rho.matrix().trace().real();
        rho = lindblad_step(m, rho, k * dt, dt);
        EXPECT_LE(std::abs(rho.matrix().trace().real() - before), 1e-10);
    }
}

TEST(Evolve, AmplitudeDampingFromOnePhoton) {
    const double gamma = 2.0;
    const auto m = pure_loss(4, gamma);
    const auto res = evolve(m, DensityMatrix::fock(HilbertSpec::single(4), 1), 1.0 / gamma, 10);
    EXPECT_NEAR(mean_n(res.final_state()), std::exp(-1.0), 1e-6);
}

TEST(Evolve, UnitaryEvolutionConservesPurity) {
    const auto s = HilbertSpec::single(10);
    const auto a = annihilation(s);
    const auto h = number(s) * number(s) + 0.5 * (a + a.adjoint());
    const LindbladModel m(h);
    const DensityMatrix rho(coherent_state(s, Complex(0.5, -0.2)));
    const double dt = max_stable_step(m);
    const auto res = evolve(m, rho, 1000 * dt, 4, {dt});
    EXPECT_NEAR(res.final_state().purity(), 1.0, 1e-8);
    EXPECT_GT(res.step, 0.0);
    EXPECT_LE(res.step, dt * (1 + 1e-12));
}

TEST(Evolve, UndrivenVacuumStaysVacuum) {
    DeviceParams p;
    p.drive_eps = 0.0;
    const auto rho = run_squeezing_protocol(p, 150e-9);
    const auto vac = DensityMatrix::vacuum(HilbertSpec::single(20));
    EXPECT_LE((rho.matrix() - vac.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Evolve, PureLossMeanNumberIsExponential) {
    const DeviceParams p;
    const auto rho0 = run_squeezing_protocol(p, 150e-9);
    const auto res = run_decay_protocol(rho0, p, 0.0, 300e-9, 12);
    const double n0 = mean_n(rho0);
    for (std::size_t k = 0; k < res.states.size(); ++k) {
        const double expect = n0 * std::exp(-p.gamma_m * res.times[k]);
        EXPECT_NEAR(mean_n(res.states[k]), expect, 1e-4 * expect);
    }
}

TEST(Evolve, DiagnosticsOverFigureRun) {
    const auto res = run_squeezing_sweep(DeviceParams{}, kFigureTaus);
    EXPECT_LE(res.max_trace_deviation(), 1e-7);
    EXPECT_GE(res.min_eigenvalue(), -1e-6);
}

TEST(Evolve, TimeDependentEnvelopeSwitchesDriveOff) {
    const DeviceParams p;
    const auto s = HilbertSpec::single(15);
    const auto a = annihilation(s);
    const auto h0 = effective_kerr_hamiltonian(dispersive_coefficients(p), s, Frame::rotating);
    const auto drive = p.drive_eps * (a + a.adjoint());
    const double t_on = 100e-9;
    const LindbladModel pulsed(h0, drive, [t_on](double t) { return t < t_on ? 1.0 : 0.0; }, 1.0,
                               {{a, p.gamma_m}});
    const LindbladModel driven(h0 + drive, {{a, p.gamma_m}});
    const LindbladModel free(h0, {{a, p.gamma_m}});
    const auto vac = DensityMatrix::vacuum(s);
    // Both share the step size because the guard sees the same bound.
    const auto mid = evolve_to(driven, vac, {t_on}).final_state();
    const auto ref = evolve_to(free, mid, {50e-9}).final_state();
    const auto out = evolve_to(pulsed, vac, {t_on, t_on + 50e-9}).final_state();
    EXPECT_LE((out.matrix() - ref.matrix()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(KerrUnitary, Examples) {
    const auto s = HilbertSpec::single(5);
    EXPECT_EQ((kerr_unitary(1.0, 0.0, s).matrix() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 0.0);
    const double delta = hz_to_angular(0.36e6);
    const auto u = kerr_unitary(delta, 150e-9, s);
    EXPECT_NEAR(std::arg(u.matrix()(2, 2)), 4.0 * kTwoPi * 0.36e6 * 1.5e-7, 1e-12);
    EXPECT_NEAR(std::arg(u.matrix()(2, 2)), 1.357, 1e-3);
    EXPECT_EQ(u.matrix()(0, 0), Complex(1.0));
    const Matrix uu = u.matrix().adjoint() * u.matrix();
    EXPECT_LE((uu - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SqueezingProtocol, ZeroDurationIsVacuum) {
    const auto rho = run_squeezing_protocol(DeviceParams{}, 0.0);
    EXPECT_EQ((rho.matrix() - DensityMatrix::vacuum(rho.space()).matrix()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(run_squeezing_protocol(DeviceParams{}, -1e-9), DomainError);
}

TEST(SqueezingProtocol, CalibratedStateAt150nsIsSqueezed) {
    const auto st = summarize(run_squeezing_protocol(DeviceParams{}, 150e-9));
    EXPECT_GE(st.v_min, 0.73);
    EXPECT_LE(st.v_min, 0.87);
}

TEST(SqueezingProtocol, UncertaintyProductAtEveryTau) {
    const auto res = run_squeezing_sweep(DeviceParams{}, kFigureTaus);
    for (const auto& rho : res.states) {
        const auto st = summarize(rho);
        EXPECT_GE(st.v_min * st.v_max, 1.0 - 1e-9);
    }
}

TEST(SqueezingProtocol, MeanMagnonNumberBelowOneUpTo250ns) {
    const auto res = run_squeezing_sweep(DeviceParams{}, kFigureTaus);
    for (std::size_t k = 0; k < res.states.size(); ++k)
        EXPECT_LT(mean_magnon_number(res.states[k]), 1.0) << "tau = " << res.times[k];
}

TEST(SqueezingProtocol, SweepMatchesIndividualRuns) {
    const DeviceParams p;
    const auto res = run_squeezing_sweep(p, {100e-9, 50e-9});
    const auto single = run_squeezing_protocol(p, 100e-9);
    EXPECT_LE((res.states[1].matrix() - single.matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SqueezingProtocol, StepHalvingChangesScalarsByLessThan1e4) {
    const DeviceParams p;
    SimulationSettings coarse;
    const double dt = max_stable_step(squeezing_model(p, coarse));
    SimulationSettings fine;
    fine.integrator.dt = dt / 2.0;
    const auto a = run_squeezing_sweep(p, kFigureTaus, coarse);
    const auto b = run_squeezing_sweep(p, kFigureTaus, fine);
    for (std::size_t k = 0; k < a.states.size(); ++k)
        EXPECT_LE(max_summary_drift(summarize(a.states[k]), summarize(b.states[k])), 1e-4);
}

TEST(SqueezingProtocol, TruncationDriftBelow1e3) {
    const DeviceParams p;
    const double drift = truncation_drift(
        [&](int dim) {
            SimulationSettings s;
            s.dim = dim;
            return run_squeezing_sweep(p, kFigureTaus, s).states;
        },
        20);
    EXPECT_LE(drift, 1e-3);
}

TEST(SqueezingProtocol, BitwiseDeterministic) {
    const auto a = run_squeezing_protocol(DeviceParams{}, 120e-9);
    const auto b = run_squeezing_protocol(DeviceParams{}, 120e-9);
    EXPECT_TRUE(a.matrix() == b.matrix());
}

TEST(SqueezingProtocol, DrivePhaseOnlyRotatesAxis) {
    const DeviceParams p;
    SimulationSettings s;
    s.drive_phase = 0.6;
    const auto a = summarize(run_squeezing_protocol(p, 150e-9));
    const auto b = summarize(run_squeezing_protocol(p, 150e-9, s));
    EXPECT_NEAR(a.v_min, b.v_min, 1e-9);
    EXPECT_NEAR(a.mean_n, b.mean_n, 1e-9);
    EXPECT_GT(std::abs(a.theta_min - b.theta_min), 0.1);
}

TEST(DecayProtocol, LongWaitRelaxesToVacuum) {
    const DeviceParams p;
    const auto rho0 = run_squeezing_protocol(p, 150e-9);
    const auto res = run_decay_protocol(rho0, p, 0.0, 3e-6, 4);
    const auto st = summarize(res.final_state());
    EXPECT_NEAR(st.v_min, 1.0, 1e-5);
    EXPECT_NEAR(st.v_max, 1.0, 1e-5);
    EXPECT_THROW(run_decay_protocol(rho0, p, 0.0, -1.0), DomainError);
}

TEST(DecayProtocol, MeanNumberDecayRateIndependentOfKerr) {
    const DeviceParams p;
    const auto rho0 = run_squeezing_protocol(p, 150e-9);
    for (double delta : {0.0, hz_to_angular(0.25e6)}) {
        const auto res = run_decay_protocol(rho0, p, delta, 400e-9, 40);
        std::vector<double> n;
        for (const auto& st : res.states) n.push_back(mean_magnon_number(st));
        for (std::size_t k = 1; k < n.size(); ++k) EXPECT_LE(n[k], n[k - 1]);
        const auto fit = exponential_fit(res.times, n, 0.0);
        EXPECT_NEAR(fit.rate, p.gamma_m, 0.01 * p.gamma_m);
        EXPECT_NEAR(fit.lifetime(), 145e-9, 0.03 * 145e-9);
    }
}

TEST(DecayProtocol, PreservationKeepsSqueezing) {
    const DeviceParams p;
    const auto rho0 = run_squeezing_protocol(p, 150e-9);
    const auto kept = summarize(run_decay_protocol(rho0, p, hz_to_angular(0.25e6), 400e-9, 8).final_state());
    const auto free = summarize(run_decay_protocol(rho0, p, 0.0, 400e-9, 8).final_state());
    EXPECT_GE(kept.v_min, 0.928);
    EXPECT_LE(kept.v_min, 0.986);
    EXPECT_LT(kept.v_min, free.v_min);
}

TEST(RamanSwap, VacuumBlockIsCosineSquared) {
    const double g0 = hz_to_angular(1e6);
    const auto tr = run_raman_swap(g0, 0, 2e-6, 201);
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        const double c = std::cos(g0 * tr.times[k]);
        EXPECT_NEAR(tr.population[k], c * c, 1e-9);
    }
    EXPECT_THROW(run_raman_swap(0.0, 0, 1e-6, 10), DomainError);
    EXPECT_THROW(run_raman_swap(g0, -1, 1e-6, 10), DomainError);
}

TEST(RamanSwap, FrequencyScaling) {
    const double g0 = hz_to_angular(1e6);
    const auto f = [&](double g, int n) {
        const auto tr = run_raman_swap(g, n, 4e-6, 2048);
        return dominant_frequency(tr.population, tr.times[1] - tr.times[0]);
    };
    const double f0 = f(g0, 0);
    EXPECT_NEAR(f0, g0 / kPi, 0.01 * g0 / kPi);
    EXPECT_NEAR(f(g0, 1) / f0, std::sqrt(2.0), 0.02 * std::sqrt(2.0));
    EXPECT_NEAR(f(2 * g0, 0) / f0, 2.0, 0.02 * 2.0);
}

TEST(FullModelCheck, UncoupledModelsCoincide) {
    DeviceParams p;
    p.g_qm = 0.0;
    SimulationSettings s;
    s.dim = 12;
    const auto r = run_full_model_check(p, 100e-9, s, 4);
    EXPECT_LE(r.trace_distance, 1e-9);
    EXPECT_LE(r.max_excited_population, 1e-12);
}

TEST(FullModelCheck, QubitStaysInGround) {
    const auto r = run_full_model_check(DeviceParams{}, 150e-9);
    EXPECT_LE(r.max_excited_population, 0.05);
}

TEST(FullModelCheck, KerrModelMatchesFullModel) {
    const auto r = run_full_model_check(DeviceParams{}, 150e-9);
    EXPECT_LE(r.trace_distance, 0.05);
}
