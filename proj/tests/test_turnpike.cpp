#include <cmath>
#include <limits>

#include "doctest.h"
#include "fraclab/turnpike.hpp"
#include "oracles.hpp"

using namespace fraclab;

namespace {

ControlProblem small_problem(Variant v, double T, double amplitude = 1.0) {
    ControlProblem p;
    p.variant = v;
    p.forms = oracle::forms(48);
    p.u_d = amplitude * oracle::gaussian(*p.forms, 0.0, 0.5);
    p.tg = make_time_grid(T, static_cast<int>(T * 8));
    return p;
}

Vec synthetic(const Vec& t, double T, double C, double gamma) {
    Vec e(t.size());
    for (Eigen::Index k = 0; k < t.size(); ++k) e[k] = C * (std::exp(-gamma * t[k]) + std::exp(-gamma * (T - t[k])));
    return e;
}

}  // namespace

TEST_CASE("scaling function") {
    CHECK(scaling_function(5.0, 10.0, 1.0) == 0.0);
    // high-precision reference values
    CHECK(scaling_function(0.0, 10.0, 1.0) == doctest::Approx(-0.99990920426259513).epsilon(1e-15));
    CHECK(scaling_function(2.0, 10.0, 0.7) == doctest::Approx(-0.97045193661345388).epsilon(1e-15));
    for (double t = 0; t <= 7.0; t += 0.37) {
        CHECK(scaling_function(7.0 - t, 7.0, 1.3) + scaling_function(t, 7.0, 1.3) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(std::abs(scaling_function(t, 7.0, 1.3)) <= 1.0);
        CHECK(std::abs(scaling_function(t, 7.0, 1e4)) <= 1.0);
    }
    CHECK(scaling_function(1.0, 4.0, 0.0) == 0.0);
    CHECK_THROWS_AS(scaling_function(1.0, 4.0, -1.0), DomainError);
}

TEST_CASE("log envelope") {
    for (double t : {0.0, 0.3, 2.0, 3.9})
        CHECK(log_envelope(t, 4.0, 0.8) ==
              doctest::Approx(std::log(std::exp(-0.8 * t) + std::exp(-0.8 * (4.0 - t)))).epsilon(1e-14));
    CHECK(std::isfinite(log_envelope(50.0, 100.0, 1e3)));
    CHECK(log_envelope(50.0, 100.0, 1e3) == doctest::Approx(-5e4 + std::log(2.0)));
}

TEST_CASE("rate fit") {
    const double T = 10.0;
    const Vec t = Vec::LinSpaced(201, 0.0, T);

    const RateFit exact = fit_turnpike_rate(t, synthetic(t, T, 2.0, 3.0), T);
    CHECK(exact.gamma_hat == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(exact.C_hat == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(exact.r2 == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(exact.envelope_pass);

    const RateFit flat = fit_turnpike_rate(t, Vec::Ones(t.size()), T);
    CHECK(flat.gamma_hat <= 1e-8);
    CHECK(flat.r2 == doctest::Approx(1.0));
    CHECK(flat.C_hat == doctest::Approx(0.5));

    const RateFit zero = fit_turnpike_rate(t, Vec::Zero(t.size()), T);
    CHECK(zero.gamma_hat == std::numeric_limits<double>::infinity());
    CHECK(zero.C_hat == 0.0);
    CHECK(zero.r2 == 1.0);
    CHECK(zero.envelope_pass);

    // lopsided and noisy curves still give R^2 in [0,1] and a dominating envelope
    std::mt19937_64 rng(51);
    Vec noisy = synthetic(t, T, 1.0, 0.9);
    for (Eigen::Index k = 0; k < t.size(); ++k) noisy[k] *= std::exp(0.3 * oracle::random_vec(1, rng)[0]) * (1 + 5 * std::exp(-t[k]));
    const RateFit nf = fit_turnpike_rate(t, noisy, T);
    CHECK(nf.r2 >= 0.0);
    CHECK(nf.r2 <= 1.0);
    CHECK(nf.envelope_pass);
    for (Eigen::Index k = 0; k < t.size(); ++k)
        CHECK(noisy[k] <= nf.C_hat * std::exp(log_envelope(t[k], T, nf.gamma_hat)) * (1 + 1e-12));

    // values below the floor are left out of the fit
    Vec floored = synthetic(t, T, 2.0, 3.0);
    floored[100] = 1e-20;
    CHECK(fit_turnpike_rate(t, floored, T).gamma_hat == doctest::Approx(3.0).epsilon(1e-8));

    CHECK_THROWS_AS(fit_turnpike_rate(t, -Vec::Ones(t.size()), T), DomainError);
    CHECK_THROWS_AS(fit_turnpike_rate(t, Vec::Ones(3), T), ConsistencyError);
}

TEST_CASE("time average") {
    const auto tg = make_time_grid(3.0, 6);
    Trajectory tr;
    tr.tg = tg;
    tr.times = Vec::LinSpaced(7, 0.0, 3.0);
    const Vec v = Vec::LinSpaced(5, -1.0, 2.0);
    tr.state = v.replicate(1, 7);
    tr.control = Mat::Zero(2, 7);
    for (int k = 1; k <= 6; ++k) tr.control.col(k) << k, 2.0 * k;
    auto [u, g] = time_average(tr);
    CHECK((u - v).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(g[0] == doctest::Approx(3.5));
    CHECK(g[1] == doctest::Approx(7.0));

    for (int k = 0; k <= 6; ++k) tr.state.col(k) = tg.time(k) * v;
    u = time_average(tr).first;
    CHECK((u - 1.5 * v).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("deviation curves") {
    for (auto v : {Variant::robin, Variant::dirichlet}) {
        CAPTURE(to_string(v));
        const NormKind norm = natural_norm(v);
        ControlProblem p = small_problem(v, 4.0);
        const auto steady = solve_steady_optimality(v, *p.forms, p.u_d);
        const OptimalSolution sol = solve_optimal(p);
        const DeviationCurve d = deviation_curve(*p.forms, sol.trajectory, steady, norm);
        CHECK(d.state[0] == interior_norm(*p.forms, steady.u_bar, norm));
        CHECK((d.state.array() >= 0).all());
        const Eigen::Index K = d.t.size() - 1;
        const double inner = d.state.segment(K / 4, K / 2).minCoeff();
        CHECK(inner < std::min(d.state[0], d.state[K]));
        const TurnpikeReport rep = turnpike_report(*p.forms, sol.trajectory, steady);
        CHECK(rep.fit.r2 >= 0.0);
        CHECK(rep.fit.r2 <= 1.0);
        CHECK(rep.fit.envelope_pass);

        const double plain = scaled_deviation_check(*p.forms, sol.trajectory, steady, 0.0, norm);
        double sw = 0, sp = 0;
        for (Eigen::Index k = 0; k <= K; ++k) {
            const double wt = (k == 0 || k == K) ? 0.5 * p.tg.tau : p.tg.tau;
            sw += wt * d.state[k] * d.state[k];
            sp += wt * d.adjoint[k] * d.adjoint[k];
        }
        CHECK(plain == doctest::Approx(0.5 * (std::sqrt(sw) + std::sqrt(sp))).epsilon(1e-12));

        p.u_d.setZero();
        const auto s0 = solve_steady_optimality(v, *p.forms, p.u_d);
        const OptimalSolution z = solve_optimal(p);
        const DeviationCurve dz = deviation_curve(*p.forms, z.trajectory, s0, norm);
        CHECK(dz.state.isZero(0));
        CHECK(dz.adjoint.isZero(0));
        CHECK(dz.control.isZero(0));
        CHECK(scaled_deviation_check(*p.forms, z.trajectory, s0, 0.7, norm) == 0.0);
        const TurnpikeReport rz = turnpike_report(*p.forms, z.trajectory, s0);
        CHECK(rz.fit.envelope_pass);
        CHECK(rz.avg_err_state == 0.0);
    }
}

TEST_CASE("averaged errors shrink with the horizon") {
    for (auto v : {Variant::robin, Variant::dirichlet}) {
        CAPTURE(to_string(v));
        double prev_u = INFINITY, prev_g = INFINITY;
        std::vector<double> Ts, eu;
        for (double T : {2.0, 4.0, 8.0}) {
            ControlProblem p = small_problem(v, T);
            const auto steady = solve_steady_optimality(v, *p.forms, p.u_d);
            const TurnpikeReport rep = turnpike_report(*p.forms, solve_optimal(p).trajectory, steady);
            CHECK(rep.avg_err_state < prev_u);
            CHECK(rep.avg_err_control < prev_g);
            prev_u = rep.avg_err_state;
            prev_g = rep.avg_err_control;
            Ts.push_back(T);
            eu.push_back(rep.avg_err_state);
        }
        CHECK(loglog_slope(Ts, eu) <= -0.4);
    }
}

TEST_CASE("solution map probe") {
    ProbeOptions opt;
    opt.samples = 4;
    opt.seed = 99;
    for (auto v : {Variant::robin, Variant::dirichlet}) {
        const auto f = oracle::forms(24);
        const double a = solution_map_probe(v, f, make_time_grid(2.0, 16), opt);
        const double b = solution_map_probe(v, f, make_time_grid(4.0, 32), opt);
        CHECK(a > 0);
        CHECK(a == solution_map_probe(v, f, make_time_grid(2.0, 16), opt));
        CHECK(b / a <= 2.0);
        CHECK(a / b <= 2.0);
    }
    opt.samples = 0;
    CHECK_THROWS_AS(solution_map_probe(Variant::robin, oracle::forms(16), make_time_grid(1.0, 4), opt), DomainError);
}

TEST_CASE("scaled deviations stay bounded below the contraction threshold") {
    for (auto v : {Variant::robin, Variant::dirichlet}) {
        CAPTURE(to_string(v));
        ProbeOptions opt;
        opt.samples = 4;
        const auto f = oracle::forms(48);
        const double probe = solution_map_probe(v, f, make_time_grid(2.0, 16), opt);
        std::vector<double> gammas, checks;
        std::vector<std::pair<Trajectory, SteadyTriple>> runs;
        for (double T : {2.0, 4.0, 8.0}) {
            const ControlProblem p = small_problem(v, T);
            const auto steady = solve_steady_optimality(v, *p.forms, p.u_d);
            const OptimalSolution sol = solve_optimal(p);
            gammas.push_back(turnpike_report(*p.forms, sol.trajectory, steady).fit.gamma_hat);
            runs.emplace_back(sol.trajectory, steady);
        }
        const double gamma = std::min(1.0 / probe, 0.5 * *std::min_element(gammas.begin(), gammas.end()));
        CHECK(gamma > 0);
        for (const auto& [traj, steady] : runs)
            checks.push_back(scaled_deviation_check(*f, traj, steady, gamma, natural_norm(v)));
        CHECK(*std::max_element(checks.begin(), checks.end()) / *std::min_element(checks.begin(), checks.end()) <= 3.0);
    }
}

TEST_CASE("convolution bound is uniform in the horizon") {
    const double k = 0.7, tau = 0.01;
    for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
        CAPTURE(p);
        std::vector<double> ratios;
        for (double T : {2.0, 4.0, 8.0, 16.0}) {
            const int K = static_cast<int>(T / tau);
            Vec eta(K + 1);
            for (int j = 0; j <= K; ++j) eta[j] = std::exp(-0.3 * j * tau) * (1.2 + std::sin(3.0 * j * tau));
            const Vec h = convolution_response(eta, k, tau);
            CHECK(h[0] == 0.0);
            ratios.push_back(lp_norm(h, tau, p) / lp_norm(eta, tau, 1.0));
        }
        const double bound = std::max(1.0, 1.0 / k);
        for (double r : ratios) CHECK(r <= bound);
    }
}

TEST_CASE("norm helpers") {
    const Vec c = Vec::Constant(10, 2.0);
    CHECK(lp_norm(c, 0.1, 1.0) == doctest::Approx(1.8));
    CHECK(lp_norm(c, 0.1, std::numeric_limits<double>::infinity()) == 2.0);
    CHECK_THROWS_AS(lp_norm(c, 0.1, 0.5), DomainError);
    CHECK(loglog_slope({1, 2, 4, 8}, {3, 3 / std::sqrt(2.0), 1.5, 3 / std::sqrt(8.0)}) == doctest::Approx(-0.5));

    const auto f = oracle::forms(16, 0.5, 2.0);
    const Vec g = Vec::Ones(f->n_collar());
    CHECK(control_space_norm(Variant::robin, *f, g) == doctest::Approx(std::sqrt(2.0 * f->h() * f->n_collar())));
    CHECK(control_space_norm(Variant::dirichlet, *f, g) == doctest::Approx(std::sqrt(f->h() * f->n_collar())));
    const Vec v = Vec::LinSpaced(16, 0.0, 1.0);
    CHECK(interior_norm(*f, v, NormKind::l2) == l2_norm(*f, v));
    CHECK(interior_norm(*f, v, NormKind::dual) == dual_norm(*f, v));
}
