#pragma once

// Config parsing and artifact serialization.
//
// Config files are JSON. Frequencies are in Hz, times in seconds. Every
// frequency is converted to rad/s here and nowhere else.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "magsq/analysis.hpp"
#include "magsq/dynamics.hpp"
#include "magsq/error.hpp"
#include "magsq/fock.hpp"
#include "magsq/model.hpp"
#include "magsq/tomography.hpp"

namespace magsq {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::ordered_json;

class ConfigError : public Error {
public:
    ConfigError(int line, const std::string& msg)
        : Error("line " + std::to_string(line) + ": " + msg), line_(line), message_(msg) {}
    int line() const noexcept { return line_; }
    const std::string& message() const noexcept { return message_; }

private:
    int line_;
    std::string message_;
};

enum class JobKind { squeeze, decay, preserve, raman, tomo, calibrate_drive, reproduce_figures };

inline const char* job_name(JobKind k) {
    switch (k) {
        case JobKind::squeeze: return "squeeze";
        case JobKind::decay: return "decay";
        case JobKind::preserve: return "preserve";
        case JobKind::raman: return "raman";
        case JobKind::tomo: return "tomo";
        case JobKind::calibrate_drive: return "calibrate-drive";
        case JobKind::reproduce_figures: return "reproduce-figures";
    }
    return "?";
}

inline std::optional<JobKind> parse_job_name(const std::string& s) {
    for (auto k : {JobKind::squeeze, JobKind::decay, JobKind::preserve, JobKind::raman, JobKind::tomo,
                   JobKind::calibrate_drive, JobKind::reproduce_figures}) {
        if (s == job_name(k)) return k;
    }
    return std::nullopt;
}

struct GridSpec {
    double extent = 2.5;
    int points = 21;

    PhaseSpaceGrid build() const { return PhaseSpaceGrid::cartesian(extent, points); }
};

struct CalibrationSpec {
    double target_vmin = 0.799;
    double target_tau = 150e-9;
    double eps_max = hz_to_angular(2.0e6);
    int scan_points = 21;
    double tolerance = 1e-4;
};

struct RamanSpec {
    double g0 = hz_to_angular(1.0e6);
    std::vector<int> n_start{0, 1};
    double duration = 4e-6;
    int samples = 2048;
};

struct JobConfig {
    DeviceParams params;
    JobKind job = JobKind::squeeze;
    std::vector<double> taus{0.0, 50e-9, 100e-9, 150e-9, 200e-9, 250e-9};
    /// Preparation pulse for decay/preserve jobs.
    double prep_tau = 150e-9;
    double tau_w_max = 400e-9;
    int tau_w_samples = 40;
    std::vector<double> delta_holds{0.0, hz_to_angular(0.25e6)};
    GridSpec grid;
    int shots = 0;  // 0 = noiseless Wigner samples
    std::uint64_t seed = 1;
    int repetitions = 1;
    int dim = 20;
    std::optional<double> dt;
    int n_theta = 72;
    int threads = 1;
    std::string output_dir = "out";
    bool truncation_check = true;
    CalibrationSpec calibration;
    RamanSpec raman;
};

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

/// Line of the first occurrence of "key" in the raw text, 1 if absent.
inline int line_of_key(const std::string& text, const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    return pos == std::string::npos ? 1 : line_of_offset(text, pos);
}

class ConfigReader {
public:
    ConfigReader(const std::string& text, const json& root) : text_(text), root_(root) {}

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw ConfigError(line_of_key(text_, key), key.empty() ? msg : "'" + key + "': " + msg);
    }

    const json* find(const json& obj, const std::string& key) const {
        auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }

    void number(const json& obj, const std::string& key, double& out) const {
        if (const json* v = find(obj, key)) {
            if (!v->is_number()) fail(key, "expected a number");
            out = v->get<double>();
            if (!std::isfinite(out)) fail(key, "must be finite");
        }
    }

    void hz(const json& obj, const std::string& key, double& out_angular) const {
        if (const json* v = find(obj, key)) {
            if (!v->is_number()) fail(key, "expected a frequency in Hz");
            out_angular = hz_to_angular(v->get<double>());
        }
    }

    void integer(const json& obj, const std::string& key, int& out) const {
        if (const json* v = find(obj, key)) {
            if (!v->is_number_integer()) fail(key, "expected an integer");
            out = v->get<int>();
        }
    }

    void boolean(const json& obj, const std::string& key, bool& out) const {
        if (const json* v = find(obj, key)) {
            if (!v->is_boolean()) fail(key, "expected true or false");
            out = v->get<bool>();
        }
    }

    void numbers(const json& obj, const std::string& key, std::vector<double>& out, double scale = 1.0) const {
        if (const json* v = find(obj, key)) {
            if (!v->is_array()) fail(key, "expected an array of numbers");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number()) fail(key, "expected an array of numbers");
                out.push_back(scale * e.get<double>());
            }
        }
    }

    void integers(const json& obj, const std::string& key, std::vector<int>& out) const {
        if (const json* v = find(obj, key)) {
            if (!v->is_array()) fail(key, "expected an array of integers");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number_integer()) fail(key, "expected an array of integers");
                out.push_back(e.get<int>());
            }
        }
    }

    void reject_unknown(const json& obj, std::initializer_list<const char*> allowed) const {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; })) {
                fail(it.key(), "unknown key");
            }
        }
    }

    const std::string& text() const { return text_; }

private:
    const std::string& text_;
    const json& root_;
};

}  // namespace detail

inline json params_to_json(const DeviceParams& p) {
    return json{{"omega_m_hz", angular_to_hz(p.omega_m)},   {"omega_ge_hz", angular_to_hz(p.omega_ge)},
                {"omega_ef_hz", angular_to_hz(p.omega_ef)}, {"eta_hz", angular_to_hz(p.eta)},
                {"omega_c_hz", angular_to_hz(p.omega_c)},   {"g_qm_hz", angular_to_hz(p.g_qm)},
                {"omega_at_hz", angular_to_hz(p.omega_AT)}, {"omega_q_hz", angular_to_hz(p.omega_q)},
                {"gamma_m_hz", angular_to_hz(p.gamma_m)},   {"gamma_q_hz", angular_to_hz(p.gamma_q)},
                {"drive_eps_hz", angular_to_hz(p.drive_eps)}, {"kappa_c_hz", angular_to_hz(p.kappa_c)}};
}

inline json config_to_json(const JobConfig& c) {
    json j;
    j["job"] = job_name(c.job);
    j["params"] = params_to_json(c.params);
    j["taus"] = c.taus;
    j["prep_tau"] = c.prep_tau;
    j["tau_w_max"] = c.tau_w_max;
    j["tau_w_samples"] = c.tau_w_samples;
    json holds = json::array();
    for (double d : c.delta_holds) holds.push_back(angular_to_hz(d));
    j["delta_holds_hz"] = holds;
    j["grid"] = {{"extent", c.grid.extent}, {"points", c.grid.points}};
    j["shots"] = c.shots;
    j["seed"] = c.seed;
    j["repetitions"] = c.repetitions;
    j["dim"] = c.dim;
    j["dt"] = c.dt ? json(*c.dt) : json(nullptr);
    j["n_theta"] = c.n_theta;
    j["output_dir"] = c.output_dir;
    j["truncation_check"] = c.truncation_check;
    j["calibration"] = {{"target_vmin", c.calibration.target_vmin},
                        {"target_tau", c.calibration.target_tau},
                        {"eps_max_hz", angular_to_hz(c.calibration.eps_max)},
                        {"scan_points", c.calibration.scan_points},
                        {"tolerance", c.calibration.tolerance}};
    j["raman"] = {{"g0_hz", angular_to_hz(c.raman.g0)},
                  {"n_start", c.raman.n_start},
                  {"duration", c.raman.duration},
                  {"samples", c.raman.samples}};
    return j;
}

/// Largest step every model of the job accepts. Covers the dim + 5 re-run
/// when the truncation check is on.
inline double integrator_guard(const JobConfig& c) {
    SimulationSettings s;
    s.dim = c.dim + (c.truncation_check ? 5 : 0);
    DeviceParams p = c.params;
    if (c.job == JobKind::calibrate_drive) p.drive_eps = std::max(p.drive_eps, c.calibration.eps_max);
    double guard = max_stable_step(squeezing_model(p, s));
    for (double d : c.delta_holds) guard = std::min(guard, max_stable_step(decay_model(p, d, s.dim)));
    return guard;
}

/// Parses and validates a config. Errors carry the offending line number.
inline JobConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(detail::line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0), "JSON syntax error");
    }
    if (!root.is_object()) throw ConfigError(1, "config must be a JSON object");
    const detail::ConfigReader rd(text, root);
    rd.reject_unknown(root, {"job", "params", "taus", "prep_tau", "tau_w_max", "tau_w_samples", "delta_holds_hz",
                             "grid", "shots", "seed", "repetitions", "dim", "dt", "n_theta", "threads",
                             "output_dir", "truncation_check", "calibration", "raman"});

    JobConfig c;
    const json* job = rd.find(root, "job");
    if (job == nullptr) rd.fail("", "missing required key 'job'");
    if (!job->is_string()) rd.fail("job", "expected a string");
    const auto kind = parse_job_name(job->get<std::string>());
    if (!kind) rd.fail("job", "unknown job '" + job->get<std::string>() + "'");
    c.job = *kind;
    if (c.job == JobKind::preserve) c.delta_holds = {hz_to_angular(0.25e6)};

    if (const json* p = rd.find(root, "params")) {
        if (!p->is_object()) rd.fail("params", "expected an object");
        rd.reject_unknown(*p, {"omega_m_hz", "omega_ge_hz", "omega_ef_hz", "eta_hz", "omega_c_hz", "g_qm_hz",
                               "omega_at_hz", "omega_q_hz", "gamma_m_hz", "gamma_q_hz", "drive_eps_hz",
                               "kappa_c_hz"});
        auto& q = c.params;
        rd.hz(*p, "omega_m_hz", q.omega_m);
        rd.hz(*p, "omega_ge_hz", q.omega_ge);
        rd.hz(*p, "omega_ef_hz", q.omega_ef);
        rd.hz(*p, "omega_c_hz", q.omega_c);
        rd.hz(*p, "g_qm_hz", q.g_qm);
        rd.hz(*p, "omega_at_hz", q.omega_AT);
        rd.hz(*p, "omega_q_hz", q.omega_q);
        rd.hz(*p, "gamma_m_hz", q.gamma_m);
        rd.hz(*p, "gamma_q_hz", q.gamma_q);
        rd.hz(*p, "drive_eps_hz", q.drive_eps);
        rd.hz(*p, "kappa_c_hz", q.kappa_c);
        if (rd.find(*p, "eta_hz")) {
            rd.hz(*p, "eta_hz", q.eta);
        } else {
            q.eta = q.omega_ef - q.omega_ge;
        }
        try {
            q.validate();
        } catch (const DomainError& e) {
            rd.fail("params", e.what());
        }
    }

    rd.numbers(root, "taus", c.taus);
    rd.number(root, "prep_tau", c.prep_tau);
    rd.number(root, "tau_w_max", c.tau_w_max);
    rd.integer(root, "tau_w_samples", c.tau_w_samples);
    rd.numbers(root, "delta_holds_hz", c.delta_holds, kTwoPi);
    rd.integer(root, "shots", c.shots);
    rd.integer(root, "repetitions", c.repetitions);
    rd.integer(root, "dim", c.dim);
    rd.integer(root, "n_theta", c.n_theta);
    rd.integer(root, "threads", c.threads);
    rd.boolean(root, "truncation_check", c.truncation_check);
    if (const json* s = rd.find(root, "seed")) {
        if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0)) {
            rd.fail("seed", "expected a non-negative integer");
        }
        c.seed = s->get<std::uint64_t>();
    }
    if (const json* d = rd.find(root, "dt"); d != nullptr && !d->is_null()) {
        double v = 0.0;
        rd.number(root, "dt", v);
        c.dt = v;
    }
    if (const json* o = rd.find(root, "output_dir")) {
        if (!o->is_string()) rd.fail("output_dir", "expected a string");
        c.output_dir = o->get<std::string>();
    }
    if (const json* g = rd.find(root, "grid")) {
        if (!g->is_object()) rd.fail("grid", "expected an object");
        rd.reject_unknown(*g, {"extent", "points"});
        rd.number(*g, "extent", c.grid.extent);
        rd.integer(*g, "points", c.grid.points);
    }
    if (const json* k = rd.find(root, "calibration")) {
        if (!k->is_object()) rd.fail("calibration", "expected an object");
        rd.reject_unknown(*k, {"target_vmin", "target_tau", "eps_max_hz", "scan_points", "tolerance"});
        rd.number(*k, "target_vmin", c.calibration.target_vmin);
        rd.number(*k, "target_tau", c.calibration.target_tau);
        rd.hz(*k, "eps_max_hz", c.calibration.eps_max);
        rd.integer(*k, "scan_points", c.calibration.scan_points);
        rd.number(*k, "tolerance", c.calibration.tolerance);
    }
    if (const json* r = rd.find(root, "raman")) {
        if (!r->is_object()) rd.fail("raman", "expected an object");
        rd.reject_unknown(*r, {"g0_hz", "n_start", "duration", "samples"});
        rd.hz(*r, "g0_hz", c.raman.g0);
        rd.integers(*r, "n_start", c.raman.n_start);
        rd.number(*r, "duration", c.raman.duration);
        rd.integer(*r, "samples", c.raman.samples);
    }

    // Semantic checks.
    for (double t : c.taus)
        if (t < 0.0) rd.fail("taus", "durations must be >= 0");
    if (c.taus.empty()) rd.fail("taus", "must not be empty");
    if (c.prep_tau < 0.0) rd.fail("prep_tau", "must be >= 0");
    if (c.tau_w_max < 0.0) rd.fail("tau_w_max", "must be >= 0");
    if (c.tau_w_samples < 1) rd.fail("tau_w_samples", "must be >= 1");
    if (c.dim < 2) rd.fail("dim", "must be >= 2");
    if (c.n_theta < 8) rd.fail("n_theta", "must be >= 8");
    if (c.shots < 0) rd.fail("shots", "must be >= 0 (0 = noiseless)");
    if (c.repetitions < 1) rd.fail("repetitions", "must be >= 1");
    if (c.threads < 1) rd.fail("threads", "must be >= 1");
    if (c.dt && !(*c.dt > 0.0)) rd.fail("dt", "must be positive");
    if (!(c.grid.extent > 0.0) || c.grid.points < 2) rd.fail("grid", "needs extent > 0 and points >= 2");
    for (double d : c.delta_holds)
        if (d < 0.0) rd.fail("delta_holds_hz", "must be >= 0");
    if (!(c.calibration.target_tau > 0.0)) rd.fail("calibration", "target_tau must be positive");
    if (!(c.calibration.eps_max > 0.0) || c.calibration.scan_points < 2) {
        rd.fail("calibration", "needs eps_max_hz > 0 and scan_points >= 2");
    }
    if (!(c.raman.g0 > 0.0) || !(c.raman.duration > 0.0) || c.raman.samples < 4) {
        rd.fail("raman", "needs g0_hz > 0, duration > 0, samples >= 4");
    }
    for (int n : c.raman.n_start)
        if (n < 0) rd.fail("raman", "n_start entries must be >= 0");
    if (c.dt && c.job != JobKind::raman) {
        const double guard = integrator_guard(c);
        if (*c.dt > guard) rd.fail("dt", fmt::format("{} s exceeds the integrator stability guard {} s", *c.dt, guard));
    }
    return c;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline JobConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

// ---------------------------------------------------------------------------
// Writers

/// Shortest round-trip representation.
inline std::string fmt_num(double v) { return fmt::format("{}", v); }

/// Comment block echoing the tool version and the resolved config.
inline std::string csv_header_block(const json& config) {
    return fmt::format("# magsq {}\n# config: {}\n", kVersion, config.dump());
}

inline json density_matrix_to_json(const DensityMatrix& rho) {
    json re = json::array(), im = json::array();
    for (int i = 0; i < rho.dim(); ++i) {
        json rr = json::array(), ri = json::array();
        for (int j = 0; j < rho.dim(); ++j) {
            rr.push_back(rho.matrix()(i, j).real());
            ri.push_back(rho.matrix()(i, j).imag());
        }
        re.push_back(std::move(rr));
        im.push_back(std::move(ri));
    }
    return json{{"dim", rho.dim()}, {"real", std::move(re)}, {"imag", std::move(im)}};
}

inline DensityMatrix density_matrix_from_json(const json& j) {
    const int d = j.at("dim").get<int>();
    const auto& re = j.at("real");
    const auto& im = j.at("imag");
    if (static_cast<int>(re.size()) != d || static_cast<int>(im.size()) != d) {
        throw ShapeError("density matrix JSON: row count does not match dim");
    }
    Matrix m(d, d);
    for (int i = 0; i < d; ++i) {
        if (static_cast<int>(re[static_cast<std::size_t>(i)].size()) != d ||
            static_cast<int>(im[static_cast<std::size_t>(i)].size()) != d) {
            throw ShapeError("density matrix JSON: column count does not match dim");
        }
        for (int j2 = 0; j2 < d; ++j2) {
            m(i, j2) = Complex(re[static_cast<std::size_t>(i)][static_cast<std::size_t>(j2)].get<double>(),
                               im[static_cast<std::size_t>(i)][static_cast<std::size_t>(j2)].get<double>());
        }
    }
    return {HilbertSpec::single(d), std::move(m)};
}

/// Columns: re_alpha, im_alpha, w_value.
inline std::string wigner_csv(const PhaseSpaceGrid& grid, const std::vector<double>& w, const json& config) {
    if (w.size() != grid.size()) throw ShapeError("wigner_csv: size mismatch");
    std::string out = csv_header_block(config);
    out += "re_alpha,im_alpha,w_value\n";
    for (std::size_t k = 0; k < w.size(); ++k) {
        out += fmt::format("{},{},{}\n", grid.points()[k].real(), grid.points()[k].imag(), w[k]);
    }
    return out;
}

struct WignerSamples {
    std::vector<Complex> points;
    std::vector<double> values;
};

inline WignerSamples parse_wigner_csv(const std::string& text) {
    WignerSamples out;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "re_alpha,im_alpha,w_value") throw ShapeError("wigner CSV: unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        std::string a, b, c;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
            throw ShapeError("wigner CSV: malformed row '" + line + "'");
        }
        out.points.emplace_back(std::stod(a), std::stod(b));
        out.values.push_back(std::stod(c));
    }
    return out;
}

/// Columns: theta, variance.
inline std::string variance_csv(const VarianceProfile& v, const json& config) {
    std::string out = csv_header_block(config);
    out += fmt::format("# v_min={} theta_min={} v_max={} theta_max={}\n", v.v_min, v.theta_min, v.v_max, v.theta_max);
    out += "theta,variance\n";
    for (std::size_t k = 0; k < v.thetas.size(); ++k) out += fmt::format("{},{}\n", v.thetas[k], v.variances[k]);
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace magsq
