#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraclab/common.hpp"

namespace fraclab {

struct BetaSegment {
    double from = 0;
    double to = 0;
    double value = 0;
};

struct TargetSpec {
    enum class Kind { constant, gaussian, indicator };
    Kind kind = Kind::constant;
    double value = 0;      // constant level, or the indicator height
    double center = 0;     // gaussian
    double width = 1;      // gaussian
    double amplitude = 0;  // gaussian
    double from = 0;       // indicator
    double to = 0;         // indicator

    double operator()(double x) const;
};

struct ExperimentConfig {
    int schema_version = 1;

    Variant variant = Variant::robin;
    double a = -1;
    double b = 1;
    double R = 1;
    double s = 0.5;
    TailMode tail;
    std::vector<BetaSegment> beta;
    TargetSpec target;

    int n = 64;
    double steps_per_unit_time = 16;
    double theta = 1;

    double cg_tol = 1e-10;
    int max_iter = 500;

    std::vector<double> horizons;

    int probe_samples = 16;
    std::uint64_t probe_seed = 1;

    std::string output_directory = "out";
    std::vector<std::string> formats{"csv", "json"};

    std::string source_text;  // the config file as read, echoed into report.json

    DomainSpec<double> domain() const;
    int steps_for(double T) const;
};

struct Diagnostic {
    std::string field;  // dotted path, e.g. "problem.s"
    int line = 0;       // 1-based line in the config file, 0 when unknown
    std::string message;

    std::string format(const std::string& file) const;
};

/// Thrown by load_config when validation fails; carries every diagnostic.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& file, std::vector<Diagnostic> diags);
    std::vector<Diagnostic> diagnostics;
};

/// Every violation in schema order; empty iff the text describes a runnable experiment.
std::vector<Diagnostic> validate_config_text(const std::string& text);

/// Reads and validates a file.  Throws std::ios_base::failure if it cannot be read.
std::vector<Diagnostic> validate_config(const std::string& path);

ExperimentConfig parse_config_text(const std::string& text, const std::string& file = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Beta sampled on the collar nodes: the last segment containing a node wins, 0 elsewhere.
BetaField<double> beta_on(const Grid1D<double>& grid, const std::vector<BetaSegment>& segments);

Vec target_on(const Grid1D<double>& grid, const TargetSpec& target);

std::string read_text_file(const std::string& path);

}  // namespace fraclab
