#pragma once

#include <cstdint>
#include <limits>
#include <utility>

#include "fraclab/control.hpp"
#include "fraclab/steady.hpp"

namespace fraclab {

enum class NormKind { l2, dual };

/// Robin measures state and adjoint in L^2, Dirichlet in the discrete H^{-s} norm.
constexpr NormKind natural_norm(Variant v) { return v == Variant::robin ? NormKind::l2 : NormKind::dual; }

double interior_norm(const Forms& forms, const Vec& v, NormKind norm);

/// Collar norm of the control space: L^2(mu) for Robin, L^2(dx) for Dirichlet.
double control_space_norm(Variant variant, const Forms& forms, const Vec& g);

struct DeviationCurve {
    Vec t;
    Vec state;
    Vec adjoint;
    Vec control;
};

struct RateFit {
    double gamma_hat = 0;
    double C_hat = 0;
    double r2 = 0;
    bool envelope_pass = false;
};

struct TurnpikeReport {
    double T = 0;
    DeviationCurve deviation;
    double avg_err_state = 0;
    double avg_err_control = 0;
    RateFit fit;
};

/// Time averages (1/T) int u dt (trapezoid) and (1/T) int g dt.  The control is piecewise
/// constant on (t_{k-1}, t_k] with value g_k, so its average is the mean of g_1..g_K.
std::pair<Vec, Vec> time_average(const Trajectory& traj);

/// Deviations from the steady triple at every t_k.  The control at t_0 is taken as g_1.
DeviationCurve deviation_curve(const Forms& forms, const Trajectory& traj, const SteadyTriple& steady,
                               NormKind norm);

/// log of e^{-gamma t} + e^{-gamma (T - t)}, safe for large gamma.
double log_envelope(double t, double T, double gamma);

/// Envelope fit  e(t) <= C (e^{-gamma t} + e^{-gamma (T-t)}).  C is the smallest constant
/// that dominates the curve for the given gamma; gamma maximizes the R^2 of log e against
/// the envelope shape.  Values below 1e-13 are left out.  An all-zero curve returns
/// gamma = +inf, C = 0, R^2 = 1 and a passing envelope.
RateFit fit_turnpike_rate(const Vec& t, const Vec& e, double T);

/// (e^{-gamma (T-t)} - e^{-gamma t}) / (e^{-gamma t} + e^{-gamma (T-t)}).
double scaling_function(double t, double T, double gamma);

/// Trapezoid L^2-in-time norm of w_k / (e^{-gamma t_k} + e^{-gamma (T-t_k)}) plus the same for the adjoint.
double scaled_deviation_check(const Forms& forms, const Trajectory& traj, const SteadyTriple& steady,
                              double gamma, NormKind norm);

/// Full report for one horizon: deviation curves, averaged errors and the envelope fit of
/// e_state + e_adjoint.
TurnpikeReport turnpike_report(const Forms& forms, const Trajectory& traj, const SteadyTriple& steady);

struct ProbeOptions {
    int samples = 16;
    std::uint64_t seed = 1;
    double cg_tol = 1e-10;
    int max_iter = 500;
};

/// Largest observed |(u, p)|_{L^2(0,T)} / |(w0, phi_T)| over random data pairs, solving the
/// optimality system with u_d = 0, u(0) = w0 and p(T) = phi_T.  Sample i draws from its own
/// stream seeded with seed + i.
double solution_map_probe(Variant variant, std::shared_ptr<const Forms> forms, const TimeGrid& tg,
                          const ProbeOptions& opt);

/// Implicit-Euler response h' = -k h + eta, h(0) = 0, sampled on t_j = j tau.
Vec convolution_response(const Vec& eta, double k, double tau);

/// Discrete L^p(0,T) norm of samples on a uniform grid (trapezoid rule; p = inf for the max).
double lp_norm(const Vec& f, double tau, double p);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

inline constexpr double kDeviationFloor = 1e-13;
inline constexpr double kEnvelopeSlack = 1.05;

}  // namespace fraclab
