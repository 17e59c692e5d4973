#include "fraclab/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace fraclab {

namespace fs = std::filesystem;

HorizonError::HorizonError(double T_, const std::string& what)
    : std::runtime_error("solver failure at horizon T=" + format_double(T_) + ": " + what), T(T_) {}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string horizon_dir_name(double T) { return "horizon_T" + format_double(T); }

std::shared_ptr<const Forms> build_forms(const ExperimentConfig& cfg, unsigned threads) {
    const auto spec = cfg.domain();
    const auto grid = make_grid(spec, cfg.n);
    const auto beta = beta_on(grid, cfg.beta);
    return std::make_shared<const Forms>(assemble_form(grid, spec, beta, threads));
}

HorizonResult run_horizon(const ExperimentConfig& cfg, std::shared_ptr<const Forms> forms, const Vec& u_d,
                          const SteadyTriple& steady, double T) {
    HorizonResult r;
    r.T = T;
    r.K = cfg.steps_for(T);
    ControlProblem p;
    p.variant = cfg.variant;
    p.forms = forms;
    p.u_d = u_d;
    p.tg = make_time_grid(T, r.K, cfg.theta);
    p.cg_tol = cfg.cg_tol;
    p.max_iter = cfg.max_iter;
    const OptimalSolution sol = solve_optimal(p);

    const Forms& f = *forms;
    const NormKind norm = natural_norm(cfg.variant);
    r.report = turnpike_report(f, sol.trajectory, steady);
    r.cost = sol.cost;
    r.cost_bound = 0.5 * T * l2_norm(f, u_d) * l2_norm(f, u_d);
    r.iterations = sol.iterations;
    r.grad_norm = sol.grad_norm;
    r.adjoint_initial_norm = interior_norm(f, sol.trajectory.adjoint.col(0), norm);
    r.state_final_norm = interior_norm(f, sol.trajectory.state.col(r.K), norm);
    return r;
}

namespace {

// Runs tasks[0..n) on `jobs` threads.  The first exception (by task index) is rethrown.
void run_pool(std::vector<std::function<void()>>& tasks, unsigned jobs) {
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
            try {
                tasks[i]();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

ExperimentResult run_sweep(const ExperimentConfig& cfg, unsigned jobs) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult res;
    res.forms = build_forms(cfg, jobs);
    const Forms& f = *res.forms;
    res.u_d = target_on(f.grid, cfg.target);
    res.steady = solve_steady_optimality(cfg.variant, f, res.u_d);

    res.horizons.resize(cfg.horizons.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < cfg.horizons.size(); ++i) {
        tasks.emplace_back([&, i] {
            const double T = cfg.horizons[i];
            try {
                res.horizons[i] = run_horizon(cfg, res.forms, res.u_d, res.steady, T);
            } catch (const std::exception& e) {
                throw HorizonError(T, e.what());
            }
        });
    }
    if (cfg.probe_samples > 0) {
        res.probe = ProbeResult{};
        res.probe->T = *std::min_element(cfg.horizons.begin(), cfg.horizons.end());
        ProbeOptions opt;
        opt.samples = cfg.probe_samples;
        opt.seed = cfg.probe_seed;
        opt.cg_tol = cfg.cg_tol;
        opt.max_iter = cfg.max_iter;
        for (int mult = 1; mult <= 2; ++mult) {
            tasks.emplace_back([&, mult, opt] {
                const double T = mult * res.probe->T;
                try {
                    const auto tg = make_time_grid(T, cfg.steps_for(T), cfg.theta);
                    const double ratio = solution_map_probe(cfg.variant, res.forms, tg, opt);
                    (mult == 1 ? res.probe->ratio_T : res.probe->ratio_2T) = ratio;
                } catch (const std::exception& e) {
                    throw HorizonError(T, std::string("solution-map probe: ") + e.what());
                }
            });
        }
    }
    run_pool(tasks, jobs);
    res.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::ios_base::failure("cannot write " + path.string());
    out << content;
    if (!out) throw std::ios_base::failure("write failed for " + path.string());
}

bool wants(const ExperimentConfig& cfg, const char* fmt) {
    return std::find(cfg.formats.begin(), cfg.formats.end(), fmt) != cfg.formats.end();
}

nlohmann::ordered_json number_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

}  // namespace

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res, const std::string& out_dir) {
    const fs::path root(out_dir);
    fs::create_directories(root);

    if (wants(cfg, "csv")) {
        for (const auto& h : res.horizons) {
            const fs::path dir = root / horizon_dir_name(h.T);
            fs::create_directories(dir);
            const auto& d = h.report.deviation;
            std::string csv = "t,err_state,err_adjoint,err_control\n";
            for (Eigen::Index k = 0; k < d.t.size(); ++k)
                csv += format_double(d.t[k]) + ',' + format_double(d.state[k]) + ',' + format_double(d.adjoint[k]) +
                       ',' + format_double(d.control[k]) + '\n';
            write_file(dir / "deviation.csv", csv);
        }
        std::string sweep = "T,avg_err_state,avg_err_control,gamma_hat,C_hat,r2,envelope_pass\n";
        for (const auto& h : res.horizons) {
            const auto& r = h.report;
            sweep += format_double(h.T) + ',' + format_double(r.avg_err_state) + ',' +
                     format_double(r.avg_err_control) + ',' + format_double(r.fit.gamma_hat) + ',' +
                     format_double(r.fit.C_hat) + ',' + format_double(r.fit.r2) + ',' +
                     (r.fit.envelope_pass ? "true" : "false") + '\n';
        }
        write_file(root / "sweep.csv", sweep);
    }

    if (wants(cfg, "json")) {
        using oj = nlohmann::ordered_json;
        oj report;
        report["schema_version"] = cfg.schema_version;
        report["fraclab_version"] = FRACLAB_VERSION;
        report["config"] = oj::parse(cfg.source_text);
        const Forms& f = *res.forms;
        const NormKind norm = natural_norm(cfg.variant);
        report["grid"] = {{"h", f.h()}, {"n_interior", f.n_interior()}, {"n_collar", f.n_collar()}};
        report["steady"] = {{"kkt_residual", res.steady.kkt_residual},
                            {"state_norm", interior_norm(f, res.steady.u_bar, norm)},
                            {"control_norm", control_space_norm(cfg.variant, f, res.steady.g_bar)},
                            {"cost", steady_cost(cfg.variant, f, res.u_d, res.steady.g_bar)}};
        oj hs = oj::array();
        for (const auto& h : res.horizons) {
            const auto& r = h.report;
            hs.push_back({{"T", h.T},
                          {"K", h.K},
                          {"deviation_csv", horizon_dir_name(h.T) + "/deviation.csv"},
                          {"cost", h.cost},
                          {"cost_bound", h.cost_bound},
                          {"cg_iterations", h.iterations},
                          {"grad_norm", h.grad_norm},
                          {"avg_err_state", r.avg_err_state},
                          {"avg_err_control", r.avg_err_control},
                          {"gamma_hat", number_or_null(r.fit.gamma_hat)},
                          {"C_hat", r.fit.C_hat},
                          {"r2", r.fit.r2},
                          {"envelope_pass", r.fit.envelope_pass},
                          {"adjoint_initial_norm", h.adjoint_initial_norm},
                          {"state_final_norm", h.state_final_norm}});
        }
        report["horizons"] = hs;
        if (res.probe) {
            report["probe"] = {{"samples", cfg.probe_samples},
                               {"seed", cfg.probe_seed},
                               {"T", res.probe->T},
                               {"ratio_T", res.probe->ratio_T},
                               {"ratio_2T", res.probe->ratio_2T}};
        } else {
            report["probe"] = nullptr;
        }
        report["wall_clock_seconds"] = res.wall_clock_seconds;
        write_file(root / "report.json", report.dump(2) + '\n');
    }
}

}  // namespace fraclab
