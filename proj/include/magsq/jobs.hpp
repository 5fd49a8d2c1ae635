#pragma once

// Batch jobs behind the command-line tool. Each job writes its artifacts and a
// manifest.json into one output directory.

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "magsq/analysis.hpp"
#include "magsq/dynamics.hpp"
#include "magsq/io.hpp"
#include "magsq/parallel.hpp"
#include "magsq/tomography.hpp"

namespace magsq {

// ---------------------------------------------------------------------------
// Drive calibration

class CalibrationError : public Error {
public:
    using Error::Error;
};

struct CalibrationPoint {
    double eps = 0.0;  // rad/s
    double v_min = 1.0;
    double mean_n = 0.0;
};

struct CalibrationReport {
    double eps = 0.0;  // rad/s
    double achieved_v_min = 1.0;
    double achieved_mean_n = 0.0;
    int bisection_steps = 0;
    bool monotonic = true;  // V_min(tau*) non-increasing over the scan up to the bracket
    std::vector<CalibrationPoint> scan;
};

inline CalibrationPoint calibration_probe(DeviceParams p, double eps, double tau, const SimulationSettings& s) {
    p.drive_eps = eps;
    const auto st = summarize(run_squeezing_protocol(p, tau, s));
    return {eps, st.v_min, st.mean_n};
}

/// Finds eps with V_min(target_tau) = target_vmin. Scans [0, eps_max], takes
/// the first sign change of V_min - target and bisects inside it.
inline CalibrationReport calibrate_drive(const DeviceParams& p, const CalibrationSpec& spec,
                                         const SimulationSettings& s = {}, int threads = 1) {
    CalibrationReport rep;
    const auto probe = [&](double eps) { return calibration_probe(p, eps, spec.target_tau, s); };

    const int n = spec.scan_points;
    rep.scan = parallel_map(static_cast<std::size_t>(n), threads, [&](std::size_t k) {
        return probe(spec.eps_max * static_cast<double>(k) / (n - 1));
    });

    const auto miss = [&](const CalibrationPoint& c) { return c.v_min - spec.target_vmin; };
    if (std::abs(miss(rep.scan.front())) <= spec.tolerance) {
        rep.eps = 0.0;
        rep.achieved_v_min = rep.scan.front().v_min;
        rep.achieved_mean_n = rep.scan.front().mean_n;
        return rep;
    }

    std::optional<std::size_t> hi;
    for (std::size_t k = 1; k < rep.scan.size(); ++k) {
        if (rep.scan[k].v_min > rep.scan[k - 1].v_min + 1e-12) rep.monotonic = false;
        if (std::abs(miss(rep.scan[k])) <= spec.tolerance || miss(rep.scan[k]) * miss(rep.scan[0]) < 0.0) {
            hi = k;
            break;
        }
    }
    if (!hi) {
        double lo_v = rep.scan.front().v_min, hi_v = lo_v;
        for (const auto& c : rep.scan) {
            lo_v = std::min(lo_v, c.v_min);
            hi_v = std::max(hi_v, c.v_min);
        }
        throw CalibrationError(fmt::format(
            "calibrate_drive: no bracket for target V_min={} at tau={} s; scanned eps/2pi in [0, {}] Hz "
            "({} points), V_min in [{}, {}]",
            spec.target_vmin, spec.target_tau, angular_to_hz(spec.eps_max), n, lo_v, hi_v));
    }

    CalibrationPoint lo = rep.scan[*hi - 1];
    CalibrationPoint up = rep.scan[*hi];
    CalibrationPoint best = std::abs(miss(up)) < std::abs(miss(lo)) ? up : lo;
    for (int it = 0; it < 60 && std::abs(miss(best)) > spec.tolerance; ++it) {
        const CalibrationPoint mid = probe(0.5 * (lo.eps + up.eps));
        ++rep.bisection_steps;
        if (std::abs(miss(mid)) < std::abs(miss(best))) best = mid;
        if (miss(mid) * miss(lo) > 0.0) {
            lo = mid;
        } else {
            up = mid;
        }
    }
    rep.eps = best.eps;
    rep.achieved_v_min = best.v_min;
    rep.achieved_mean_n = best.mean_n;
    return rep;
}

inline json calibration_to_json(const CalibrationReport& r, const CalibrationSpec& spec) {
    json scan = json::array();
    for (const auto& c : r.scan)
        scan.push_back({{"eps_hz", angular_to_hz(c.eps)}, {"v_min", c.v_min}, {"mean_n", c.mean_n}});
    return json{{"target_vmin", spec.target_vmin},
                {"target_tau", spec.target_tau},
                {"eps_hz", angular_to_hz(r.eps)},
                {"achieved_v_min", r.achieved_v_min},
                {"achieved_mean_n", r.achieved_mean_n},
                {"bisection_steps", r.bisection_steps},
                {"monotonic_before_bracket", r.monotonic},
                {"scan", std::move(scan)}};
}

// ---------------------------------------------------------------------------
// Artifact bookkeeping

class ArtifactSet {
public:
    ArtifactSet(std::filesystem::path dir, json config) : dir_(std::move(dir)), config_(std::move(config)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }
    const json& config() const { return config_; }

    /// `body` must already start with the CSV header block.
    void csv(const std::string& name, const std::string& body) {
        write_text(dir_ / name, body);
        files_.push_back(name);
    }

    void json_file(const std::string& name, json payload) {
        json doc;
        doc["meta"] = meta();
        for (auto it = payload.begin(); it != payload.end(); ++it) doc[it.key()] = it.value();
        write_json(dir_ / name, doc);
        files_.push_back(name);
    }

    void flag(const std::string& what) { flags_.push_back(what); }
    void diagnostic(const std::string& key, json value) { diagnostics_[key] = std::move(value); }
    void child(const std::string& name) { files_.push_back(name + "/manifest.json"); }

    const std::vector<std::string>& flags() const { return flags_; }

    void write_manifest(const std::string& job) {
        json m;
        m["meta"] = meta();
        m["job"] = job;
        m["files"] = files_;
        m["diagnostics"] = diagnostics_.is_null() ? json::object() : diagnostics_;
        m["flags"] = flags_;
        write_json(dir_ / "manifest.json", m);
    }

private:
    json meta() const { return json{{"tool", "magsq"}, {"version", kVersion}, {"config", config_}}; }

    std::filesystem::path dir_;
    json config_;
    std::vector<std::string> files_;
    json diagnostics_;
    std::vector<std::string> flags_;
};

struct JobOutcome {
    std::filesystem::path dir;
    std::vector<std::string> flags;
};

namespace detail {

inline SimulationSettings simulation_settings(const JobConfig& c, int dim) {
    SimulationSettings s;
    s.dim = dim;
    s.integrator.dt = c.dt;
    return s;
}

/// "150ns" style tag used in file names.
inline std::string time_tag(double seconds) { return fmt::format("{}ns", std::llround(seconds * 1e9)); }
inline std::string hz_tag(double angular) { return fmt::format("{}Hz", std::llround(angular_to_hz(angular))); }

inline json summary_json(const StateSummary& s) {
    return json{{"v_min", s.v_min}, {"v_max", s.v_max}, {"theta_min", s.theta_min}, {"mean_n", s.mean_n}};
}

/// Squeezing states at each tau. Tries one shared trajectory first and falls
/// back to independent per-point runs so one failing point cannot sink the rest.
inline std::vector<std::optional<DensityMatrix>> squeeze_states(const JobConfig& c, int dim, int threads,
                                                               std::vector<std::string>& errors,
                                                               EvolutionResult* traj_out = nullptr) {
    const auto s = simulation_settings(c, dim);
    std::vector<std::optional<DensityMatrix>> out(c.taus.size());
    errors.assign(c.taus.size(), "");
    try {
        auto traj = run_squeezing_sweep(c.params, c.taus, s);
        for (std::size_t i = 0; i < c.taus.size(); ++i) {
            const auto it = std::find(traj.times.begin(), traj.times.end(), c.taus[i]);
            out[i] = traj.states[static_cast<std::size_t>(it - traj.times.begin())];
        }
        if (traj_out != nullptr) *traj_out = std::move(traj);
        return out;
    } catch (const Error&) {
        // fall through to per-point runs
    }
    auto per = parallel_map(c.taus.size(), threads, [&](std::size_t i) -> std::pair<std::optional<DensityMatrix>, std::string> {
        try {
            return {run_squeezing_protocol(c.params, c.taus[i], s), ""};
        } catch (const Error& e) {
            return {std::nullopt, e.what()};
        }
    });
    for (std::size_t i = 0; i < per.size(); ++i) {
        out[i] = std::move(per[i].first);
        errors[i] = per[i].second;
    }
    return out;
}

inline void record_truncation(ArtifactSet& art, double drift, const std::string& what) {
    art.diagnostic("truncation_drift", drift);
    if (drift > 1e-3) art.flag(fmt::format("{}: truncation drift {} exceeds 1e-3", what, drift));
}

inline void squeeze_job(const JobConfig& c, ArtifactSet& art, int threads) {
    std::vector<std::string> errors;
    EvolutionResult traj;
    const auto states = squeeze_states(c, c.dim, threads, errors, &traj);
    const auto grid = c.grid.build();

    std::string summary = csv_header_block(art.config());
    summary += "tau,v_min,v_max,theta_min,mean_n,squeezing_db,status\n";
    for (std::size_t i = 0; i < states.size(); ++i) {
        const std::string tag = time_tag(c.taus[i]);
        if (!states[i]) {
            summary += fmt::format("{},nan,nan,nan,nan,nan,failed\n", c.taus[i]);
            art.flag(fmt::format("tau={} s: {}", c.taus[i], errors[i]));
            continue;
        }
        const auto& rho = *states[i];
        const auto profile = variance_profile(rho, c.n_theta);
        const double n = mean_magnon_number(rho);
        summary += fmt::format("{},{},{},{},{},{},ok\n", c.taus[i], profile.v_min, profile.v_max, profile.theta_min, n,
                               squeezing_db(profile.v_min));
        art.json_file("rho_" + tag + ".json", json{{"tau", c.taus[i]}, {"rho", density_matrix_to_json(rho)}});
        art.csv("wigner_" + tag + ".csv", wigner_csv(grid, wigner_grid(rho, grid, threads), art.config()));
        art.csv("variance_" + tag + ".csv", variance_csv(profile, art.config()));
    }
    art.csv("summary.csv", summary);
    if (!traj.states.empty()) {
        art.diagnostic("max_trace_deviation", traj.max_trace_deviation());
        art.diagnostic("min_eigenvalue", traj.min_eigenvalue());
        art.diagnostic("step", traj.step);
    }
    if (c.truncation_check) {
        std::vector<std::string> e2;
        const auto refined = squeeze_states(c, c.dim + 5, threads, e2);
        double drift = 0.0;
        for (std::size_t i = 0; i < states.size(); ++i)
            if (states[i] && refined[i])
                drift = std::max(drift, max_summary_drift(summarize(*states[i]), summarize(*refined[i])));
        record_truncation(art, drift, "squeeze");
    }
}

struct DecayBranch {
    EvolutionResult traj;
    std::vector<StateSummary> summaries;
};

inline DecayBranch decay_branch(const JobConfig& c, const DensityMatrix& rho0, double delta_hold) {
    DecayBranch b;
    b.traj = run_decay_protocol(rho0, c.params, delta_hold, c.tau_w_max, c.tau_w_samples, {c.dt});
    for (const auto& st : b.traj.states) b.summaries.push_back(summarize(st));
    return b;
}

inline void decay_job(const JobConfig& c, ArtifactSet& art, int threads) {
    const auto s = simulation_settings(c, c.dim);
    const auto prep = run_squeezing_protocol(c.params, c.prep_tau, s);
    std::optional<DensityMatrix> prep_refined;
    if (c.truncation_check) prep_refined = run_squeezing_protocol(c.params, c.prep_tau, simulation_settings(c, c.dim + 5));

    json fits = json::array();
    double drift = 0.0, trace_dev = 0.0, min_eig = 1.0;
    const auto branches = parallel_map(c.delta_holds.size(), threads, [&](std::size_t i) {
        std::pair<std::optional<DecayBranch>, std::string> r;
        try {
            r.first = decay_branch(c, prep, c.delta_holds[i]);
        } catch (const Error& e) {
            r.second = e.what();
        }
        return r;
    });
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const double delta = c.delta_holds[i];
        const std::string name = "decay_delta_" + hz_tag(delta) + ".csv";
        if (!branches[i].first) {
            art.flag(fmt::format("delta_hold={} Hz: {}", angular_to_hz(delta), branches[i].second));
            fits.push_back({{"delta_hold_hz", angular_to_hz(delta)}, {"status", "failed"}});
            continue;
        }
        const auto& b = *branches[i].first;
        trace_dev = std::max(trace_dev, b.traj.max_trace_deviation());
        min_eig = std::min(min_eig, b.traj.min_eigenvalue());
        const bool oracle = delta == 0.0;
        const double v0 = b.summaries.front().v_min;

        std::string body = csv_header_block(art.config());
        body += oracle ? "t,v_min,v_max,theta_min,mean_n,oracle_v_min\n" : "t,v_min,v_max,theta_min,mean_n\n";
        std::vector<double> ns, vs;
        double oracle_dev = 0.0;
        for (std::size_t k = 0; k < b.summaries.size(); ++k) {
            const auto& sm = b.summaries[k];
            const double t = b.traj.times[k];
            body += fmt::format("{},{},{},{},{}", t, sm.v_min, sm.v_max, sm.theta_min, sm.mean_n);
            if (oracle) {
                const double o = variance_relaxation_oracle(v0, c.params.gamma_m, t);
                oracle_dev = std::max(oracle_dev, std::abs(o - sm.v_min));
                body += fmt::format(",{}", o);
            }
            body += "\n";
            ns.push_back(sm.mean_n);
            vs.push_back(sm.v_min);
        }
        art.csv(name, body);

        json fit{{"delta_hold_hz", angular_to_hz(delta)}, {"status", "ok"}};
        fit["final_v_min"] = b.summaries.back().v_min;
        fit["final_mean_n"] = b.summaries.back().mean_n;
        const auto try_fit = [&](const char* key, const std::vector<double>& vals, double offset) {
            try {
                const auto f = exponential_fit(b.traj.times, vals, offset);
                fit[key] = {{"rate", f.rate}, {"lifetime", f.lifetime()}, {"amplitude", f.amplitude},
                            {"offset", f.offset}, {"residual", f.residual}};
            } catch (const Error& e) {
                fit[key] = {{"error", e.what()}};
                art.flag(fmt::format("delta_hold={} Hz: {} fit failed: {}", angular_to_hz(delta), key, e.what()));
            }
        };
        if (b.summaries.size() >= 4) {
            try_fit("mean_n_fit", ns, 0.0);
            try_fit("v_min_fit", vs, 1.0);
        }
        if (oracle) {
            fit["oracle_max_deviation"] = oracle_dev;
            if (oracle_dev > 0.01) art.flag(fmt::format("delta_hold=0: V_min departs from relaxation oracle by {}", oracle_dev));
        }
        fits.push_back(std::move(fit));

        if (prep_refined) {
            const auto r = decay_branch(c, *prep_refined, delta);
            for (std::size_t k = 0; k < r.summaries.size(); ++k)
                drift = std::max(drift, max_summary_drift(b.summaries[k], r.summaries[k]));
        }
    }
    art.json_file("fits.json", json{{"prep_tau", c.prep_tau}, {"prep_state", summary_json(summarize(prep))},
                                    {"branches", std::move(fits)}});
    art.diagnostic("max_trace_deviation", trace_dev);
    art.diagnostic("min_eigenvalue", min_eig);
    if (prep_refined) record_truncation(art, drift, "decay");
}

inline void raman_job(const JobConfig& c, ArtifactSet& art, int threads) {
    const auto& r = c.raman;
    const auto traces = parallel_map(r.n_start.size(), threads, [&](std::size_t i) {
        return run_raman_swap(r.g0, r.n_start[i], r.duration, r.samples, c.dim);
    });
    json rows = json::array();
    std::optional<double> f0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& tr = traces[i];
        std::string body = csv_header_block(art.config());
        body += "t,population\n";
        for (std::size_t k = 0; k < tr.times.size(); ++k) body += fmt::format("{},{}\n", tr.times[k], tr.population[k]);
        art.csv(fmt::format("raman_n{}.csv", r.n_start[i]), body);

        const double dt = tr.times[1] - tr.times[0];
        const double f = dominant_frequency(tr.population, dt);
        if (r.n_start[i] == 0) f0 = f;
        rows.push_back({{"n_start", r.n_start[i]},
                        {"swap_frequency_hz", f},
                        {"expected_hz", raman_coupling(r.g0, r.n_start[i]) / kPi}});
    }
    if (f0) {
        for (auto& row : rows) row["ratio_to_n0"] = row["swap_frequency_hz"].get<double>() / *f0;
    }
    art.json_file("raman_summary.json", json{{"g0_hz", angular_to_hz(r.g0)}, {"traces", std::move(rows)}});
}

inline void tomo_job(const JobConfig& c, ArtifactSet& art, int threads) {
    std::vector<std::string> errors;
    const auto states = squeeze_states(c, c.dim, threads, errors);
    const auto grid = c.grid.build();
    ReconstructionOptions opts;
    opts.threads = threads;

    std::string summary = csv_header_block(art.config());
    summary += "tau,repetition,seed,fidelity,v_min_true,v_min_hat,residual,iterations,converged\n";
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (!states[i]) {
            art.flag(fmt::format("tau={} s: {}", c.taus[i], errors[i]));
            continue;
        }
        const auto& truth = *states[i];
        const double v_true = summarize(truth).v_min;
        for (int rep = 0; rep < c.repetitions; ++rep) {
            const std::uint64_t seed = c.seed + i * static_cast<std::uint64_t>(c.repetitions) + static_cast<std::uint64_t>(rep);
            const std::string tag = c.repetitions > 1 ? fmt::format("{}_r{}", time_tag(c.taus[i]), rep) : time_tag(c.taus[i]);
            try {
                const auto measured = c.shots == 0 ? wigner_grid(truth, grid, threads)
                                                   : simulate_measurement(truth, grid, c.shots, seed, threads);
                const auto res = reconstruct(measured, grid, c.dim, opts);
                const double fid = fidelity(truth, res.rho_hat);
                summary += fmt::format("{},{},{},{},{},{},{},{},{}\n", c.taus[i], rep, c.shots == 0 ? 0 : seed, fid,
                                       v_true, summarize(res.rho_hat).v_min, res.residual, res.iterations,
                                       res.converged ? 1 : 0);
                art.csv("measured_" + tag + ".csv", wigner_csv(grid, measured, art.config()));
                art.json_file("rho_hat_" + tag + ".json",
                              json{{"tau", c.taus[i]}, {"rho", density_matrix_to_json(res.rho_hat)}});
                if (!res.converged) art.flag("tau=" + tag + ": reconstruction hit the iteration cap");
            } catch (const Error& e) {
                summary += fmt::format("{},{},{},nan,{},nan,nan,0,0\n", c.taus[i], rep, seed, v_true);
                art.flag(fmt::format("tau={} rep {}: {}", c.taus[i], rep, e.what()));
            }
        }
    }
    art.csv("tomography_summary.csv", summary);
}

inline void calibrate_job(const JobConfig& c, ArtifactSet& art, int threads) {
    const auto s = simulation_settings(c, c.dim);
    try {
        const auto rep = calibrate_drive(c.params, c.calibration, s, threads);
        art.json_file("calibration.json", calibration_to_json(rep, c.calibration));
        if (!rep.monotonic) art.flag("calibration: V_min(tau*) is not monotonic in eps before the bracket");
        if (std::abs(rep.achieved_v_min - c.calibration.target_vmin) > c.calibration.tolerance) {
            art.flag("calibration: tolerance not reached");
        }
    } catch (const CalibrationError& e) {
        art.json_file("calibration.json", json{{"status", "failed"}, {"error", e.what()}});
        art.flag(e.what());
    }
}

inline JobOutcome run_single(const JobConfig& c, JobKind kind, const std::filesystem::path& dir, int threads) {
    JobConfig k = c;
    k.job = kind;
    ArtifactSet art(dir, config_to_json(k));
    switch (kind) {
        case JobKind::squeeze: squeeze_job(k, art, threads); break;
        case JobKind::decay:
        case JobKind::preserve: decay_job(k, art, threads); break;
        case JobKind::raman: raman_job(k, art, threads); break;
        case JobKind::tomo: tomo_job(k, art, threads); break;
        case JobKind::calibrate_drive: calibrate_job(k, art, threads); break;
        case JobKind::reproduce_figures: throw Error("run_single: composite job");
    }
    art.write_manifest(job_name(kind));
    return {dir, art.flags()};
}

}  // namespace detail

/// Runs the configured job into `out_dir`. The thread count never changes
/// the bytes written.
inline JobOutcome run_job(const JobConfig& c, const std::filesystem::path& out_dir, int threads = 1) {
    if (c.job != JobKind::reproduce_figures) return detail::run_single(c, c.job, out_dir, threads);

    ArtifactSet top(out_dir, config_to_json(c));
    for (auto kind : {JobKind::squeeze, JobKind::decay, JobKind::raman, JobKind::tomo}) {
        JobConfig sub = c;
        if (kind == JobKind::decay) sub.delta_holds = {0.0, hz_to_angular(0.25e6)};
        if (kind == JobKind::tomo) sub.shots = 0;
        const auto r = detail::run_single(sub, kind, out_dir / job_name(kind), threads);
        for (const auto& f : r.flags) top.flag(std::string(job_name(kind)) + ": " + f);
        top.child(job_name(kind));
    }
    top.write_manifest(job_name(c.job));
    return {out_dir, top.flags()};
}

}  // namespace magsq
