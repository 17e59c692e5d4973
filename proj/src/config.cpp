#include "fraclab/config.hpp"

#include <cmath>
#include <fstream>
#include <ios>
#include <optional>
#include <sstream>

#include "json.hpp"

namespace fraclab {

using nlohmann::json;

double TargetSpec::operator()(double x) const {
    switch (kind) {
        case Kind::constant: return value;
        case Kind::gaussian: {
            const double z = (x - center) / width;
            return amplitude * std::exp(-0.5 * z * z);
        }
        case Kind::indicator: return (x >= from && x <= to) ? value : 0.0;
    }
    return 0;
}

DomainSpec<double> ExperimentConfig::domain() const {
    DomainSpec<double> d;
    d.a = a;
    d.b = b;
    d.collar_width = R;
    d.s = s;
    d.tail = tail;
    return d;
}

int ExperimentConfig::steps_for(double T) const {
    return static_cast<int>(std::lround(steps_per_unit_time * T));
}

std::string Diagnostic::format(const std::string& file) const {
    std::ostringstream os;
    os << file;
    if (line > 0) os << ':' << line;
    os << ": " << field << ": " << message;
    return os.str();
}

namespace {

std::string join_lines(const std::string& file, const std::vector<Diagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
        if (!out.empty()) out += '\n';
        out += d.format(file);
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(const std::string& file, std::vector<Diagnostic> diags)
    : std::runtime_error(join_lines(file, diags)), diagnostics(std::move(diags)) {}

namespace {

int line_at(const std::string& text, std::size_t pos) {
    int line = 1;
    for (std::size_t i = 0; i < pos && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

// Line of a dotted key path, found by walking the raw text key by key.  Falls back to the
// deepest key that was found.
int locate(const std::string& text, const std::string& dotted) {
    std::size_t pos = 0;
    int line = 0;
    std::istringstream parts(dotted);
    std::string key;
    while (std::getline(parts, key, '.')) {
        const auto bracket = key.find('[');
        if (bracket != std::string::npos) key = key.substr(0, bracket);
        const std::string quoted = '"' + key + '"';
        std::size_t found = pos;
        bool ok = false;
        while ((found = text.find(quoted, found)) != std::string::npos) {
            std::size_t k = found + quoted.size();
            while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
            if (k < text.size() && text[k] == ':') {
                ok = true;
                break;
            }
            found += quoted.size();
        }
        if (!ok) break;
        pos = found;
        line = line_at(text, pos);
    }
    return line;
}

class Checker {
public:
    explicit Checker(const std::string& text) : text_(text) {}

    void fail(const std::string& field, const std::string& msg) {
        diags_.push_back({field, locate(text_, field), msg});
    }

    const json* child(const json& obj, const std::string& key) const {
        if (!obj.is_object()) return nullptr;
        auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }

    const json* section(const json& root, const std::string& key, bool required) {
        const json* j = child(root, key);
        if (!j) {
            if (required) fail(key, "missing section");
            return nullptr;
        }
        if (!j->is_object()) {
            fail(key, "must be an object");
            return nullptr;
        }
        return j;
    }

    std::optional<double> number(const json* obj, const std::string& key, const std::string& path, bool required) {
        const json* j = obj ? child(*obj, key) : nullptr;
        if (!j) {
            if (required) fail(path, "missing value");
            return std::nullopt;
        }
        if (!j->is_number()) {
            fail(path, "must be a number");
            return std::nullopt;
        }
        const double v = j->get<double>();
        if (!std::isfinite(v)) {
            fail(path, "must be finite");
            return std::nullopt;
        }
        return v;
    }

    std::optional<long long> integer(const json* obj, const std::string& key, const std::string& path, bool required) {
        const json* j = obj ? child(*obj, key) : nullptr;
        if (!j) {
            if (required) fail(path, "missing value");
            return std::nullopt;
        }
        if (!j->is_number_integer()) {
            fail(path, "must be an integer");
            return std::nullopt;
        }
        return j->get<long long>();
    }

    std::optional<std::string> string(const json* obj, const std::string& key, const std::string& path, bool required) {
        const json* j = obj ? child(*obj, key) : nullptr;
        if (!j) {
            if (required) fail(path, "missing value");
            return std::nullopt;
        }
        if (!j->is_string()) {
            fail(path, "must be a string");
            return std::nullopt;
        }
        return j->get<std::string>();
    }

    std::vector<Diagnostic> take() { return std::move(diags_); }

private:
    const std::string& text_;
    std::vector<Diagnostic> diags_;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Validates and fills `cfg`; every problem found is recorded in the checker.
void check(const std::string& text, const json& root, Checker& c, ExperimentConfig& cfg) {
    if (!root.is_object()) {
        c.fail("<root>", "config must be a JSON object");
        return;
    }

    if (auto v = c.integer(&root, "schema_version", "schema_version", false)) {
        if (*v != 1) c.fail("schema_version", "unsupported schema version " + std::to_string(*v) + " (expected 1)");
        cfg.schema_version = static_cast<int>(*v);
    }

    // problem
    const json* p = c.section(root, "problem", true);
    if (auto v = c.string(p, "variant", "problem.variant", p != nullptr)) {
        if (*v == "robin") cfg.variant = Variant::robin;
        else if (*v == "dirichlet") cfg.variant = Variant::dirichlet;
        else c.fail("problem.variant", "must be \"robin\" or \"dirichlet\", got \"" + *v + "\"");
    }
    auto a = c.number(p, "a", "problem.a", p != nullptr);
    auto b = c.number(p, "b", "problem.b", p != nullptr);
    if (a) cfg.a = *a;
    if (b) cfg.b = *b;
    if (a && b && !(*a < *b)) c.fail("problem.b", "must exceed problem.a");
    if (auto v = c.number(p, "R", "problem.R", p != nullptr)) {
        cfg.R = *v;
        if (!(*v > 0)) c.fail("problem.R", "collar width must be positive, got " + fmt(*v));
    }
    if (auto v = c.number(p, "s", "problem.s", p != nullptr)) {
        cfg.s = *v;
        if (!(*v > 0 && *v < 1)) c.fail("problem.s", "fractional order must lie in (0,1), got " + fmt(*v));
    }
    if (const json* t = p ? c.child(*p, "tail_mode") : nullptr) {
        if (!t->is_object()) {
            c.fail("problem.tail_mode", "must be an object with a \"kind\"");
        } else if (auto kind = c.string(t, "kind", "problem.tail_mode.kind", true)) {
            if (*kind == "zero") {
                cfg.tail = TailMode::zero();
            } else if (*kind == "constant") {
                if (auto v = c.number(t, "value", "problem.tail_mode.value", true)) cfg.tail = TailMode::constant(*v);
            } else {
                c.fail("problem.tail_mode.kind", "must be \"zero\" or \"constant\", got \"" + *kind + "\"");
            }
        }
    }
    if (const json* bj = p ? c.child(*p, "beta") : nullptr) {
        if (!bj->is_array()) {
            c.fail("problem.beta", "must be a list of {from, to, value} segments");
        } else {
            for (std::size_t i = 0; i < bj->size(); ++i) {
                const std::string path = "problem.beta[" + std::to_string(i) + "]";
                const json& seg = (*bj)[i];
                if (!seg.is_object()) {
                    c.fail(path, "segment must be an object");
                    continue;
                }
                auto from = c.number(&seg, "from", path + ".from", true);
                auto to = c.number(&seg, "to", path + ".to", true);
                auto val = c.number(&seg, "value", path + ".value", true);
                if (from && to && !(*from < *to)) c.fail(path + ".to", "segment must satisfy from < to");
                if (val && *val < 0) c.fail(path + ".value", "beta must be nonnegative, got " + fmt(*val));
                if (from && to && val) cfg.beta.push_back({*from, *to, *val});
            }
        }
    } else if (p && cfg.variant == Variant::robin) {
        c.fail("problem.beta", "robin problems need a beta profile");
    }
    if (const json* t = p ? c.child(*p, "target") : nullptr) {
        if (!t->is_object()) {
            c.fail("problem.target", "must be an object with a \"kind\"");
        } else if (auto kind = c.string(t, "kind", "problem.target.kind", true)) {
            TargetSpec& tg = cfg.target;
            if (*kind == "constant") {
                tg.kind = TargetSpec::Kind::constant;
                if (auto v = c.number(t, "value", "problem.target.value", true)) tg.value = *v;
            } else if (*kind == "gaussian") {
                tg.kind = TargetSpec::Kind::gaussian;
                if (auto v = c.number(t, "center", "problem.target.center", true)) tg.center = *v;
                if (auto v = c.number(t, "width", "problem.target.width", true)) {
                    tg.width = *v;
                    if (!(*v > 0)) c.fail("problem.target.width", "must be positive, got " + fmt(*v));
                }
                if (auto v = c.number(t, "amplitude", "problem.target.amplitude", true)) tg.amplitude = *v;
            } else if (*kind == "indicator") {
                tg.kind = TargetSpec::Kind::indicator;
                auto from = c.number(t, "from", "problem.target.from", true);
                auto to = c.number(t, "to", "problem.target.to", true);
                if (from) tg.from = *from;
                if (to) tg.to = *to;
                if (from && to && !(*from < *to)) c.fail("problem.target.to", "interval must satisfy from < to");
                if (auto v = c.number(t, "value", "problem.target.value", true)) tg.value = *v;
            } else {
                c.fail("problem.target.kind", "must be \"constant\", \"gaussian\" or \"indicator\", got \"" + *kind + "\"");
            }
        }
    } else if (p) {
        c.fail("problem.target", "missing value");
    }

    // discretization
    const json* d = c.section(root, "discretization", true);
    bool n_ok = false;
    if (auto v = c.integer(d, "n", "discretization.n", d != nullptr)) {
        if (*v < 8 || *v > 100000) c.fail("discretization.n", "need 8 <= n <= 100000, got " + std::to_string(*v));
        else {
            cfg.n = static_cast<int>(*v);
            n_ok = true;
        }
    }
    bool k_ok = false;
    if (auto v = c.number(d, "steps_per_unit_time", "discretization.steps_per_unit_time", d != nullptr)) {
        if (!(*v > 0)) c.fail("discretization.steps_per_unit_time", "must be positive, got " + fmt(*v));
        else {
            cfg.steps_per_unit_time = *v;
            k_ok = true;
        }
    }
    if (auto v = c.number(d, "theta", "discretization.theta", false)) {
        if (!(*v >= 0.5 && *v <= 1.0)) c.fail("discretization.theta", "must lie in [0.5, 1], got " + fmt(*v));
        cfg.theta = *v;
    }
    if (n_ok && a && b && cfg.R > 0 && *a < *b) {
        const double h = (*b - *a) / cfg.n;
        if (cfg.R / h + 1e-9 < 1.0) c.fail("problem.R", "collar narrower than one cell (h = " + fmt(h) + ")");
    }

    // control
    const json* ctl = c.section(root, "control", false);
    if (auto v = c.number(ctl, "cg_tol", "control.cg_tol", false)) {
        if (!(*v > 0)) c.fail("control.cg_tol", "must be positive, got " + fmt(*v));
        cfg.cg_tol = *v;
    }
    if (auto v = c.integer(ctl, "max_iter", "control.max_iter", false)) {
        if (*v < 1) c.fail("control.max_iter", "must be >= 1, got " + std::to_string(*v));
        cfg.max_iter = static_cast<int>(*v);
    }

    // sweep
    const json* sw = c.section(root, "sweep", true);
    if (sw) {
        const json* T = c.child(*sw, "T");
        if (!T) {
            c.fail("sweep.T", "missing horizon list");
        } else if (!T->is_array() || T->empty()) {
            c.fail("sweep.T", "must be a nonempty list of horizons");
        } else {
            for (std::size_t i = 0; i < T->size(); ++i) {
                const std::string path = "sweep.T[" + std::to_string(i) + "]";
                const json& x = (*T)[i];
                if (!x.is_number() || !std::isfinite(x.get<double>()) || !(x.get<double>() > 0)) {
                    c.fail(path, "horizon must be a positive number");
                    continue;
                }
                const double Tv = x.get<double>();
                cfg.horizons.push_back(Tv);
                if (k_ok) {
                    const double steps = cfg.steps_per_unit_time * Tv;
                    if (std::lround(steps) < 2)
                        c.fail(path, "horizon gives fewer than 2 time steps");
                    else if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
                        c.fail(path, "steps_per_unit_time * T must be an integer, got " + fmt(steps));
                }
            }
        }
    }

    // probe
    const json* pr = c.section(root, "probe", false);
    if (auto v = c.integer(pr, "samples", "probe.samples", false)) {
        if (*v < 0) c.fail("probe.samples", "must be >= 0, got " + std::to_string(*v));
        cfg.probe_samples = static_cast<int>(*v);
    }
    if (auto v = c.integer(pr, "seed", "probe.seed", false)) {
        if (*v < 0) c.fail("probe.seed", "must be >= 0");
        cfg.probe_seed = static_cast<std::uint64_t>(*v);
    }

    // output
    const json* out = c.section(root, "output", false);
    if (auto v = c.string(out, "directory", "output.directory", false)) {
        if (v->empty()) c.fail("output.directory", "must not be empty");
        cfg.output_directory = *v;
    }
    if (const json* f = out ? c.child(*out, "formats") : nullptr) {
        if (!f->is_array()) {
            c.fail("output.formats", "must be a list");
        } else {
            cfg.formats.clear();
            for (const auto& x : *f) {
                if (!x.is_string() || (x != "csv" && x != "json")) c.fail("output.formats", "entries must be \"csv\" or \"json\"");
                else cfg.formats.push_back(x.get<std::string>());
            }
        }
    }
    (void)text;
}

}  // namespace

std::vector<Diagnostic> validate_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        return {{"<json>", line_at(text, e.byte > 0 ? e.byte - 1 : 0), std::string("malformed JSON: ") + e.what()}};
    }
    Checker c(text);
    ExperimentConfig cfg;
    check(text, root, c, cfg);
    return c.take();
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<Diagnostic> validate_config(const std::string& path) {
    return validate_config_text(read_text_file(path));
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& file) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(file, {{"<json>", line_at(text, e.byte > 0 ? e.byte - 1 : 0),
                                  std::string("malformed JSON: ") + e.what()}});
    }
    Checker c(text);
    ExperimentConfig cfg;
    check(text, root, c, cfg);
    auto diags = c.take();
    if (!diags.empty()) throw ConfigError(file, std::move(diags));
    cfg.source_text = text;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return parse_config_text(read_text_file(path), path);
}

BetaField<double> beta_on(const Grid1D<double>& grid, const std::vector<BetaSegment>& segments) {
    BetaField<double> beta;
    beta.values = Vec::Zero(grid.n_collar());
    const Vec x = grid.collar_nodes();
    for (Eigen::Index c = 0; c < x.size(); ++c)
        for (const auto& seg : segments)
            if (x[c] >= seg.from && x[c] <= seg.to) beta.values[c] = seg.value;
    return beta;
}

Vec target_on(const Grid1D<double>& grid, const TargetSpec& target) {
    const auto x = grid.interior_nodes();
    Vec u(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) u[i] = target(x[i]);
    return u;
}

}  // namespace fraclab
