// Command-line front end: `magsq run --config <path> [--out <dir>] [--threads N]`
// and `magsq validate --config <path>`.

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "magsq/io.hpp"
#include "magsq/jobs.hpp"

namespace {

int report_config_error(const std::string& path, const magsq::ConfigError& e) {
    std::fprintf(stderr, "%s:%d: %s\n", path.c_str(), e.line(), e.message().c_str());
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Magnon squeezing simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int threads = 0;

    auto* run = app.add_subcommand("run", "Run the job described by a config file");
    run->add_option("--config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    run->add_option("--threads", threads, "Worker threads (overrides threads)")->check(CLI::PositiveNumber);

    auto* validate = app.add_subcommand("validate", "Check a config file without running it");
    validate->add_option("--config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    magsq::JobConfig cfg;
    try {
        cfg = magsq::load_config(config_path);
    } catch (const magsq::ConfigError& e) {
        return report_config_error(config_path, e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s: %s\n", config_path.c_str(), e.what());
        return 2;
    }

    if (*validate) {
        std::printf("%s: ok (job %s)\n", config_path.c_str(), magsq::job_name(cfg.job));
        return 0;
    }

    const std::filesystem::path dir = out_dir.empty() ? cfg.output_dir : out_dir;
    try {
        const auto outcome = magsq::run_job(cfg, dir, threads > 0 ? threads : cfg.threads);
        std::printf("%s: wrote %s (%zu flagged)\n", magsq::job_name(cfg.job), (dir / "manifest.json").c_str(),
                    outcome.flags.size());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
