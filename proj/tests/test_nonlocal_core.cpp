#include <cmath>
#include <numbers>
#include <thread>

#include "doctest.h"
#include "fraclab/nonlocal_core.hpp"
#include "oracles.hpp"

using namespace fraclab;

namespace {

DomainSpec<double> unit_spec(double s = 0.5, TailMode tail = TailMode::zero(), double R = 1.0) {
    return {-1.0, 1.0, R, s, tail};
}

Forms build(int n, double s = 0.5, double beta = 0.0, TailMode tail = TailMode::zero(), unsigned threads = 1) {
    const auto spec = unit_spec(s, tail);
    const auto grid = make_grid(spec, n);
    BetaField<double> b;
    b.values = Vec::Constant(grid.n_collar(), beta);
    return assemble_form(grid, spec, b, threads);
}

double getoor_error(int n) {
    const Forms f = build(n);
    Vec u = Vec::Zero(f.n_nodes());
    for (Eigen::Index i = 0; i < f.n_nodes(); ++i)
        if (f.grid.is_interior(i)) u[i] = std::sqrt(std::max(0.0, 1 - f.grid.nodes[i] * f.grid.nodes[i]));
    const Vec lap = apply_fractional_laplacian(f, u);
    const auto x = f.grid.interior_nodes();
    double err = 0;
    for (Eigen::Index i = 0; i < lap.size(); ++i)
        if (std::abs(x[i]) <= 0.8) err = std::max(err, std::abs(lap[i] - 1.0));
    return err;
}

}  // namespace

TEST_CASE("normalization constant") {
    // high-precision Gamma-function values
    CHECK(normalization_constant(1, 0.5) == doctest::Approx(0.31830988618379067).epsilon(1e-13));
    CHECK(normalization_constant(2, 0.5) == doctest::Approx(0.15915494309189534).epsilon(1e-13));
    CHECK(normalization_constant(1, 0.3) == doctest::Approx(0.23009638168163210).epsilon(1e-13));
    CHECK(normalization_constant(1, 0.8) == doctest::Approx(0.26747969093097504).epsilon(1e-13));
    // leading factor s
    CHECK(normalization_constant(1, 1e-8) / 1e-8 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(normalization_constant(1, 1.5), DomainError);
    CHECK_THROWS_AS(normalization_constant(1, 0.0), DomainError);
    CHECK_THROWS_AS(normalization_constant(0, 0.5), DomainError);
}

TEST_CASE("kernel tail rho") {
    const auto spec = unit_spec();
    CHECK(kernel_tail_rho(2.0, spec) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(kernel_tail_rho(1.125, spec) == doctest::Approx(7.5294117647058824).epsilon(1e-14));
    CHECK(kernel_tail_rho(-1.5, unit_spec(0.3)) == doctest::Approx(1.5643943402458544).epsilon(1e-13));
    double prev = kernel_tail_rho(1.01, spec);
    for (double x = 1.1; x < 1e4; x *= 1.7) {
        const double r = kernel_tail_rho(x, spec);
        CHECK(r > 0);
        CHECK(r < prev);
        prev = r;
    }
    CHECK(prev < 1e-6);
    CHECK_THROWS_AS(kernel_tail_rho(0.3, spec), DomainError);
    CHECK_THROWS_AS(kernel_tail_rho(1.0, spec), DomainError);
}

TEST_CASE("domain and grid") {
    CHECK_THROWS_AS(DomainSpec<double>({1.0, -1.0, 1.0, 0.5, TailMode::zero()}).validate(), DomainError);
    CHECK_THROWS_AS(unit_spec(1.2).validate(), DomainError);
    CHECK_THROWS_AS(unit_spec(0.5, TailMode::zero(), 0.0).validate(), DomainError);
    CHECK_THROWS_AS(unit_spec(0.5, TailMode::constant(std::nan(""))).validate(), DomainError);
    CHECK(unit_spec(0.9).outside_validated_range());
    CHECK_FALSE(unit_spec(0.5).outside_validated_range());

    const auto g = make_grid(unit_spec(), 16);
    CHECK(g.h == doctest::Approx(0.125));
    CHECK(g.n_interior == 16);
    CHECK(g.collar_per_side == 8);
    for (Eigen::Index i = 1; i < g.size(); ++i) CHECK(g.nodes[i] - g.nodes[i - 1] == doctest::Approx(g.h).epsilon(1e-12));
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        CHECK(g.nodes[i] != -1.0);
        CHECK(g.nodes[i] != 1.0);
        const bool inside = g.nodes[i] > -1 && g.nodes[i] < 1;
        CHECK(inside == g.is_interior(i));
    }
    // collar narrower than one cell
    CHECK_THROWS(make_grid(unit_spec(0.5, TailMode::zero(), 0.05), 16));
    // a grid built for another domain is rejected
    BetaField<double> b;
    b.values = Vec::Zero(g.n_collar());
    CHECK_THROWS_AS(assemble_form(g, unit_spec(0.5, TailMode::zero(), 2.0), b), ConsistencyError);
}

TEST_CASE("assembled entries match hand quadrature") {
    const Forms f = build(8);
    // interior nodes start at index 4 (x = -0.875)
    CHECK(f.grid.nodes[4] == doctest::Approx(-0.875));
    CHECK(f.full(4, 8) == doctest::Approx(-0.019894367886486917).epsilon(1e-13));   // |x_i - x_j| = 1
    CHECK(f.full(4, 7) == doctest::Approx(-0.035367765131532297).epsilon(1e-13));   // |x_i - x_j| = 0.75
    CHECK(f.full(0, 4) == doctest::Approx(-std::numbers::inv_pi * 0.0625).epsilon(1e-13));  // x = -1.875 to -0.875
    // collar nodes are not coupled to each other
    CHECK(f.full(0, 1) == 0.0);
    CHECK(f.full(0, f.n_nodes() - 1) == 0.0);
}

TEST_CASE("form invariants") {
    std::mt19937_64 rng(7);
    for (auto tail : {TailMode::zero(), TailMode::constant(0.7)}) {
        const Forms f = build(48, 0.4, 2.0, tail);
        const double amax = f.full.cwiseAbs().maxCoeff();
        CHECK((f.full - f.full.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * amax);
        const Vec emb = f.grid.join(Vec::Zero(f.n_interior()), f.mass_mu);
        for (int t = 0; t < 100; ++t) {
            const Vec x = oracle::random_vec(f.n_nodes(), rng);
            const double q = x.dot(f.full * x);
            CHECK(q / x.squaredNorm() >= -1e-10);
            CHECK(q >= x.cwiseAbs2().dot(emb));
        }
    }
    const Forms c = build(48, 0.4, 2.0, TailMode::constant(0.7));
    const Vec ones = Vec::Ones(c.n_nodes());
    CHECK((c.stiffness * ones).cwiseAbs().maxCoeff() <= 1e-10 * c.stiffness.diagonal().maxCoeff());
    CHECK(build(16, 0.5, 0.0).mass_mu.isZero(0));
}

TEST_CASE("parallel assembly is bit-identical") {
    const Forms a = build(64, 0.35, 1.5, TailMode::constant(1.0), 1);
    const Forms b = build(64, 0.35, 1.5, TailMode::constant(1.0), 4);
    CHECK((a.full.array() == b.full.array()).all());
    CHECK((a.stiffness.array() == b.stiffness.array()).all());
}

TEST_CASE("fractional laplacian") {
    const Forms f = build(64, 0.5, 0.0, TailMode::constant(2.5));
    const Vec c = Vec::Constant(f.n_nodes(), 2.5);
    CHECK(apply_fractional_laplacian(f, c).cwiseAbs().maxCoeff() <= 1e-10);

    std::mt19937_64 rng(3);
    const Vec u = oracle::random_vec(f.n_nodes(), rng), v = oracle::random_vec(f.n_nodes(), rng);
    const Vec lhs = apply_fractional_laplacian(f, Vec(1.5 * u - 0.25 * v));
    const Vec rhs = 1.5 * apply_fractional_laplacian(f, u) - 0.25 * apply_fractional_laplacian(f, v);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * rhs.cwiseAbs().maxCoeff());

    CHECK_THROWS_AS(apply_fractional_laplacian(f, Vec::Zero(3)), ConsistencyError);
}

TEST_CASE("Getoor profile converges to 1 under refinement") {
    double prev = getoor_error(64);
    for (int n : {128, 256, 512, 1024}) {
        const double e = getoor_error(n);
        CHECK(e < prev);
        prev = e;
    }
    CHECK(getoor_error(512) <= 0.1);
}

TEST_CASE("nonlocal normal derivative") {
    const Forms f = build(512);
    CHECK(nonlocal_normal_derivative(f, Vec::Ones(f.n_nodes())).cwiseAbs().maxCoeff() <= 1e-12);

    const Vec u = f.grid.join(Vec::Ones(f.n_interior()), Vec::Zero(f.n_collar()));
    const Vec nd = nonlocal_normal_derivative(f, u);
    const Eigen::Index last = f.n_collar() - 1;  // outermost right collar node, next to x = 2
    const double x = f.grid.nodes[f.grid.collar_node(last)];
    const double exact = -std::numbers::inv_pi * kernel_tail_rho(x, f.spec);
    CHECK(std::abs(nd[last] - exact) <= 0.02 * std::abs(exact));
    CHECK(-std::numbers::inv_pi * kernel_tail_rho(2.0, f.spec) == doctest::Approx(-0.21220659078919378).epsilon(1e-13));
}

TEST_CASE("summation by parts") {
    const Forms f = build(256, 0.5, 3.0);
    std::mt19937_64 rng(11);
    std::vector<Vec> vs;
    for (int i = 0; i < 20; ++i) vs.push_back(oracle::random_vec(f.n_nodes(), rng));
    const double h = f.h();
    for (const auto& u : vs)
        for (const auto& v : vs) {
            const double e = gagliardo_form(f, u, v);
            const double parts = f.grid.interior(v).dot(apply_fractional_laplacian(f, u)) * h +
                                 f.grid.collar(v).dot(nonlocal_normal_derivative(f, u)) * h;
            const double scale = std::sqrt(std::abs(gagliardo_form(f, u, u) * gagliardo_form(f, v, v))) + 1;
            CHECK(std::abs(e - parts) <= 1e-12 * scale);
        }
}

TEST_CASE("robin extension") {
    const Forms f0 = build(32, 0.5, 0.0);
    const Vec c = robin_extension(f0, Vec::Constant(f0.n_interior(), 1.7));
    CHECK((c.array() - 1.7).abs().maxCoeff() <= 1e-13);

    const Forms big = build(32, 0.5, 1e9);
    std::mt19937_64 rng(5);
    const Vec u = oracle::random_vec(big.n_interior(), rng);
    CHECK(robin_extension(big, u).cwiseAbs().maxCoeff() < 1e-6);

    const Forms f = build(64, 0.3, 0.8);
    const Vec x = robin_extended(f, oracle::random_vec(f.n_interior(), rng));
    const Vec rc = nonlocal_normal_derivative(f, x) + f.beta.values.cwiseProduct(f.grid.collar(x));
    CHECK(rc.cwiseAbs().maxCoeff() <= 1e-10 * (1 + nonlocal_normal_derivative(f, x).cwiseAbs().maxCoeff()));
}

TEST_CASE("dual norm") {
    const Forms f = build(40, 0.6);
    CHECK(dual_norm(f, Vec::Zero(f.n_interior())) == 0.0);

    Eigen::SelfAdjointEigenSolver<Mat> eig(f.A_II / f.h());
    for (int k : {0, 5, 20}) {
        const Vec w = eig.eigenvectors().col(k);
        const double lhs = dual_norm(f, w) * energy_norm(f, w);
        CHECK(lhs == doctest::Approx(w.dot(f.mass_interior.cwiseProduct(w))).epsilon(1e-12));
    }

    std::mt19937_64 rng(9);
    const Vec v = oracle::random_vec(f.n_interior(), rng);
    const Vec mv = f.mass_interior.cwiseProduct(v);
    const double dense = std::sqrt(mv.dot(f.A_II.inverse() * mv));
    CHECK(dual_norm(f, v) == doctest::Approx(dense).epsilon(1e-10));
    CHECK(l2_norm(f, v) == doctest::Approx(std::sqrt(f.h() * v.squaredNorm())).epsilon(1e-14));
}
