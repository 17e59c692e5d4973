#include "fraclab/turnpike.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fraclab {

double interior_norm(const Forms& forms, const Vec& v, NormKind norm) {
    return norm == NormKind::l2 ? l2_norm(forms, v) : dual_norm(forms, v);
}

double control_space_norm(Variant variant, const Forms& forms, const Vec& g) {
    return std::sqrt(g.cwiseAbs2().dot(control_weights(variant, forms)));
}

std::pair<Vec, Vec> time_average(const Trajectory& traj) {
    const auto K = traj.state.cols() - 1;
    if (K < 1) throw ConsistencyError("time_average: trajectory needs at least two levels");
    Vec u = 0.5 * (traj.state.col(0) + traj.state.col(K));
    for (Eigen::Index k = 1; k < K; ++k) u += traj.state.col(k);
    u /= static_cast<double>(K);
    Vec g = traj.control.rightCols(K).rowwise().sum() / static_cast<double>(K);
    return {u, g};
}

DeviationCurve deviation_curve(const Forms& forms, const Trajectory& traj, const SteadyTriple& steady,
                               NormKind norm) {
    const Eigen::Index K = traj.state.cols() - 1;
    Grid1D<double>::check_length(steady.u_bar.size(), traj.state.rows(), "deviation_curve: u_bar");
    Grid1D<double>::check_length(steady.g_bar.size(), traj.control.rows(), "deviation_curve: g_bar");
    if (traj.adjoint.cols() != K + 1) throw ConsistencyError("deviation_curve: trajectory has no adjoint");
    DeviationCurve d;
    d.t = traj.times;
    d.state.resize(K + 1);
    d.adjoint.resize(K + 1);
    d.control.resize(K + 1);
    for (Eigen::Index k = 0; k <= K; ++k) {
        d.state[k] = interior_norm(forms, traj.state.col(k) - steady.u_bar, norm);
        d.adjoint[k] = interior_norm(forms, traj.adjoint.col(k) - steady.adj_bar, norm);
        d.control[k] = control_space_norm(traj.variant, forms, traj.control.col(std::max<Eigen::Index>(k, 1)) - steady.g_bar);
    }
    return d;
}

double log_envelope(double t, double T, double gamma) {
    const double near = std::min(t, T - t);
    return -gamma * near + std::log1p(std::exp(-gamma * std::abs(T - 2 * t)));
}

namespace {

struct FitEval {
    double r2;
    double log_c;
};

FitEval evaluate_fit(const std::vector<double>& t, const std::vector<double>& loge, double T, double gamma,
                     double ss_tot) {
    std::vector<double> r(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) r[i] = loge[i] - log_envelope(t[i], T, gamma);
    const double top = *std::max_element(r.begin(), r.end());
    double ss = 0;
    for (double ri : r) ss += (ri - top) * (ri - top);
    double r2;
    if (ss_tot > 0)
        r2 = 1.0 - ss / ss_tot;
    else
        r2 = ss <= 1e-24 ? 1.0 : -std::numeric_limits<double>::infinity();
    return {r2, top};
}

}  // namespace

RateFit fit_turnpike_rate(const Vec& t, const Vec& e, double T) {
    if (t.size() != e.size()) throw ConsistencyError("fit_turnpike_rate: t and e differ in length");
    if (!(T > 0)) throw DomainError("fit_turnpike_rate: T must be positive");
    std::vector<double> tw, loge;
    for (Eigen::Index k = 0; k < e.size(); ++k) {
        if (e[k] < 0 || !std::isfinite(e[k])) throw DomainError("fit_turnpike_rate: deviations must be finite and >= 0");
        if (e[k] >= kDeviationFloor) {
            tw.push_back(t[k]);
            loge.push_back(std::log(e[k]));
        }
    }
    RateFit fit;
    if (tw.empty()) {
        fit.gamma_hat = std::numeric_limits<double>::infinity();
        fit.C_hat = 0;
        fit.r2 = 1;
        fit.envelope_pass = true;
        return fit;
    }

    const double mean = std::accumulate(loge.begin(), loge.end(), 0.0) / static_cast<double>(loge.size());
    double ss_tot = 0;
    for (double l : loge) ss_tot += (l - mean) * (l - mean);
    if (ss_tot < 1e-24) ss_tot = 0;
    auto score = [&](double g) { return evaluate_fit(tw, loge, T, g, ss_tot).r2; };

    // Coarse scan, then golden-section refinement of the best bracket.
    const double g_max = 120.0 / T + 10.0;
    const int n_grid = 600;
    const double step = g_max / n_grid;
    int best = 0;
    double best_score = score(0.0);
    for (int i = 1; i <= n_grid; ++i) {
        const double s = score(i * step);
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    double lo = std::max(0.0, (best - 1) * step);
    double hi = std::min(g_max, (best + 1) * step);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = score(x1), f2 = score(x2);
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = score(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = score(x2);
        }
    }
    double gamma = 0.5 * (lo + hi);
    if (score(gamma) < best_score) gamma = best * step;
    if (score(0.0) >= score(gamma)) gamma = 0.0;

    const FitEval ev = evaluate_fit(tw, loge, T, gamma, ss_tot);
    fit.gamma_hat = gamma;
    fit.C_hat = std::exp(ev.log_c);
    fit.r2 = std::clamp(ev.r2, 0.0, 1.0);
    fit.envelope_pass = true;
    for (Eigen::Index k = 0; k < e.size(); ++k)
        if (e[k] > kEnvelopeSlack * fit.C_hat * std::exp(log_envelope(t[k], T, gamma))) fit.envelope_pass = false;
    return fit;
}

double scaling_function(double t, double T, double gamma) {
    if (gamma < 0) throw DomainError("scaling_function: gamma must be >= 0");
    // Divide through by the larger exponential to stay finite for large gamma.
    const double d = gamma * (T - 2 * t);  // log of e^{-gamma t} / e^{-gamma (T-t)}
    if (d >= 0) {
        const double q = std::exp(-d);
        return (q - 1.0) / (1.0 + q);
    }
    const double q = std::exp(d);
    return (1.0 - q) / (1.0 + q);
}

double scaled_deviation_check(const Forms& forms, const Trajectory& traj, const SteadyTriple& steady, double gamma,
                              NormKind norm) {
    if (gamma < 0) throw DomainError("scaled_deviation_check: gamma must be >= 0");
    const Eigen::Index K = traj.state.cols() - 1;
    const double T = traj.tg.T;
    const double tau = traj.tg.tau;
    double sw = 0, sp = 0;
    for (Eigen::Index k = 0; k <= K; ++k) {
        const double wt = (k == 0 || k == K) ? 0.5 * tau : tau;
        const double m2 = std::exp(2 * log_envelope(traj.times[k], T, gamma));
        const double w = interior_norm(forms, traj.state.col(k) - steady.u_bar, norm);
        const double p = interior_norm(forms, traj.adjoint.col(k) - steady.adj_bar, norm);
        sw += wt * w * w / m2;
        sp += wt * p * p / m2;
    }
    return std::sqrt(sw) + std::sqrt(sp);
}

TurnpikeReport turnpike_report(const Forms& forms, const Trajectory& traj, const SteadyTriple& steady) {
    const NormKind norm = natural_norm(traj.variant);
    TurnpikeReport rep;
    rep.T = traj.tg.T;
    rep.deviation = deviation_curve(forms, traj, steady, norm);
    const auto [u_avg, g_avg] = time_average(traj);
    rep.avg_err_state = interior_norm(forms, u_avg - steady.u_bar, norm);
    rep.avg_err_control = control_space_norm(traj.variant, forms, g_avg - steady.g_bar);
    rep.fit = fit_turnpike_rate(rep.deviation.t, rep.deviation.state + rep.deviation.adjoint, rep.T);
    return rep;
}

double solution_map_probe(Variant variant, std::shared_ptr<const Forms> forms, const TimeGrid& tg,
                          const ProbeOptions& opt) {
    if (opt.samples < 1) throw DomainError("solution_map_probe: need at least one sample");
    const Forms& f = *forms;
    const NormKind norm = natural_norm(variant);
    const Eigen::Index n = f.n_interior();
    double worst = 0;
    for (int i = 0; i < opt.samples; ++i) {
        std::mt19937_64 rng(opt.seed + static_cast<std::uint64_t>(i));
        std::normal_distribution<double> normal(0.0, 1.0);
        Vec w0(n), phi(n);
        for (Eigen::Index j = 0; j < n; ++j) w0[j] = normal(rng);
        for (Eigen::Index j = 0; j < n; ++j) phi[j] = normal(rng);
        const double a = interior_norm(f, w0, norm), b = interior_norm(f, phi, norm);
        const double data = std::sqrt(a * a + b * b);
        if (data == 0) continue;

        ControlProblem p;
        p.variant = variant;
        p.forms = forms;
        p.u_d = Vec::Zero(n);
        p.tg = tg;
        p.cg_tol = opt.cg_tol;
        p.max_iter = opt.max_iter;
        p.u0 = w0;
        p.terminal = phi;
        const OptimalSolution sol = solve_optimal(p);

        double s = 0;
        const auto& tr = sol.trajectory;
        for (int k = 0; k <= tg.K; ++k) {
            const double wt = (k == 0 || k == tg.K) ? 0.5 * tg.tau : tg.tau;
            const double u = interior_norm(f, tr.state.col(k), norm);
            const double q = interior_norm(f, tr.adjoint.col(k), norm);
            s += wt * (u * u + q * q);
        }
        worst = std::max(worst, std::sqrt(s) / data);
    }
    return worst;
}

Vec convolution_response(const Vec& eta, double k, double tau) {
    if (!(tau > 0)) throw DomainError("convolution_response: tau must be positive");
    Vec h = Vec::Zero(eta.size());
    for (Eigen::Index j = 0; j + 1 < eta.size(); ++j) h[j + 1] = (h[j] + tau * eta[j + 1]) / (1.0 + k * tau);
    return h;
}

double lp_norm(const Vec& f, double tau, double p) {
    if (f.size() == 0) return 0;
    if (std::isinf(p)) return f.cwiseAbs().maxCoeff();
    if (!(p >= 1)) throw DomainError("lp_norm: p must be >= 1");
    double s = 0;
    const Eigen::Index last = f.size() - 1;
    for (Eigen::Index j = 0; j <= last; ++j) {
        const double wt = (j == 0 || j == last) ? 0.5 * tau : tau;
        s += wt * std::pow(std::abs(f[j]), p);
    }
    return std::pow(s, 1.0 / p);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ConsistencyError("loglog_slope: need matching samples");
    const auto n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace fraclab
