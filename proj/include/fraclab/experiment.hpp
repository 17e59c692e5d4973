#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fraclab/config.hpp"
#include "fraclab/turnpike.hpp"

namespace fraclab {

struct HorizonResult {
    double T = 0;
    int K = 0;
    TurnpikeReport report;
    double cost = 0;
    double cost_bound = 0;  // (T/2) |u_d|^2
    int iterations = 0;
    double grad_norm = 0;
    double adjoint_initial_norm = 0;  // |p(0)|
    double state_final_norm = 0;      // |u(T)|
};

struct ProbeResult {
    double T = 0;
    double ratio_T = 0;
    double ratio_2T = 0;
};

struct ExperimentResult {
    std::shared_ptr<const Forms> forms;
    Vec u_d;
    SteadyTriple steady;
    std::vector<HorizonResult> horizons;
    std::optional<ProbeResult> probe;
    double wall_clock_seconds = 0;
};

/// A solver failure tied to one horizon of the sweep.
class HorizonError : public std::runtime_error {
public:
    HorizonError(double T, const std::string& what);
    double T;
};

std::shared_ptr<const Forms> build_forms(const ExperimentConfig& cfg, unsigned threads = 1);

/// Solve one horizon: optimal control plus its turnpike report against `steady`.
HorizonResult run_horizon(const ExperimentConfig& cfg, std::shared_ptr<const Forms> forms, const Vec& u_d,
                          const SteadyTriple& steady, double T);

/// Full sweep.  Horizons are distributed over `jobs` worker threads; results do not depend on jobs.
ExperimentResult run_sweep(const ExperimentConfig& cfg, unsigned jobs = 1);

/// Writes horizon_T<T>/deviation.csv, sweep.csv and report.json (per cfg.formats).
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res, const std::string& out_dir);

/// Directory name for one horizon, e.g. "horizon_T4" or "horizon_T2.5".
std::string horizon_dir_name(double T);

/// printf("%.17g") of a double.
std::string format_double(double v);

}  // namespace fraclab
