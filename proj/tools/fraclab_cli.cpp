// fraclab: run turnpike sweeps for exterior-controlled fractional heat equations.
//
//   fraclab run <config.json> [--out DIR] [--jobs N]
//   fraclab validate <config.json>
//   fraclab version
//
// Exit codes: 0 ok, 1 usage or I/O error, 2 invalid config, 3 solver failure.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "fraclab/experiment.hpp"

namespace {

int print_diagnostics(const std::string& file, const std::vector<fraclab::Diagnostic>& diags) {
    for (const auto& d : diags) std::cerr << d.format(file) << '\n';
    return diags.empty() ? 0 : 2;
}

int cmd_run(const std::string& path, const std::string& out, unsigned jobs) {
    fraclab::ExperimentConfig cfg;
    try {
        cfg = fraclab::load_config(path);
    } catch (const fraclab::ConfigError& e) {
        return print_diagnostics(path, e.diagnostics);
    }
    const std::string dir = out.empty() ? cfg.output_directory : out;
    fraclab::ExperimentResult res;
    try {
        res = fraclab::run_sweep(cfg, jobs);
    } catch (const fraclab::HorizonError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: solver failure before the sweep: " << e.what() << '\n';
        return 3;
    }
    fraclab::write_outputs(cfg, res, dir);

    std::printf("%-8s %-14s %-14s %-12s %-8s %s\n", "T", "avg_err_state", "avg_err_ctrl", "gamma_hat", "r2", "cg_iter");
    for (const auto& h : res.horizons)
        std::printf("%-8g %-14.6e %-14.6e %-12.6g %-8.5f %d\n", h.T, h.report.avg_err_state,
                    h.report.avg_err_control, h.report.fit.gamma_hat, h.report.fit.r2, h.iterations);
    if (res.probe)
        std::printf("probe: ratio(T=%g) = %.6g, ratio(T=%g) = %.6g\n", res.probe->T, res.probe->ratio_T,
                    2 * res.probe->T, res.probe->ratio_2T);
    std::printf("wrote %s (%.2f s)\n", dir.c_str(), res.wall_clock_seconds);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fraclab: turnpike experiments for the fractional heat equation with exterior control"};
    app.require_subcommand(1);

    std::string run_path, out_dir;
    unsigned jobs = 1;
    auto* run = app.add_subcommand("run", "run the T-sweep described by a config file");
    run->add_option("config", run_path, "config JSON")->required();
    run->add_option("--out", out_dir, "output directory (overrides output.directory)");
    run->add_option("--jobs", jobs, "worker threads for the sweep")->check(CLI::PositiveNumber);

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "check a config file and list every problem");
    validate->add_option("config", validate_path, "config JSON")->required();

    app.add_subcommand("version", "print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(run_path, out_dir, jobs);
        if (*validate) {
            const auto diags = fraclab::validate_config(validate_path);
            if (diags.empty()) std::cout << validate_path << ": ok\n";
            return print_diagnostics(validate_path, diags);
        }
        std::cout << "fraclab " << FRACLAB_VERSION << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
