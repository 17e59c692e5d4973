#include "fraclab/steady.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <sstream>

namespace fraclab {

Vec control_weights(Variant variant, const Forms& forms) {
    if (variant == Variant::robin) return forms.mass_mu;
    return Vec::Constant(forms.n_collar(), forms.h());
}

std::vector<bool> control_mask(Variant variant, const Forms& forms) {
    if (variant == Variant::robin) return forms.beta.active();
    return std::vector<bool>(static_cast<std::size_t>(forms.n_collar()), true);
}

namespace {

void require_length(const Vec& v, Eigen::Index n, const char* what) {
    Grid1D<double>::check_length(v.size(), n, what);
}

Eigen::LLT<Mat> factor_robin(const Forms& forms) {
    if (forms.spec.tail.is_constant() && (forms.beta.values.array() == 0).all()) {
        std::ostringstream os;
        os << "robin system is singular: beta vanishes on every collar node and the constant "
              "tail fixes no level; decoupled collar nodes:";
        for (Eigen::Index c = 0; c < forms.n_collar(); ++c) os << ' ' << c;
        throw DegeneracyError(os.str());
    }
    Eigen::LLT<Mat> llt(forms.full);
    if (llt.info() != Eigen::Success) throw DegeneracyError("robin system matrix is not positive definite");
    return llt;
}

// Interior-weighted mass on all nodes: h on Omega, 0 on the collar.
Vec node_mass(const Forms& forms) {
    return forms.grid.join(forms.mass_interior, Vec::Zero(forms.n_collar()));
}

}  // namespace

Vec solve_robin_steady(const Forms& forms, const Vec& f, const Vec& g) {
    require_length(f, forms.n_interior(), "solve_robin_steady: f");
    require_length(g, forms.n_collar(), "solve_robin_steady: g");
    const auto llt = factor_robin(forms);
    const Vec rhs = forms.grid.join(forms.mass_interior.cwiseProduct(f), forms.mass_mu.cwiseProduct(g));
    Vec x = llt.solve(rhs);
    const double res = (forms.full * x - rhs).norm();
    if (res > 1e-10 * std::max(rhs.norm(), forms.full.norm() * x.norm()) && res > 0)
        throw SolveError("solve_robin_steady: residual " + std::to_string(res) + " above tolerance");
    return x;
}

Vec dirichlet_map(const Forms& forms, const Vec& g) {
    require_length(g, forms.n_collar(), "dirichlet_map: g");
    return -forms.A_II_llt.solve(forms.A_IE * g);
}

double dirichlet_map_norm(const Forms& forms) {
    // Both lumped masses equal h * I, so the weighted operator norm is the spectral norm of D.
    const Mat D = -forms.A_II_llt.solve(forms.A_IE);
    Eigen::SelfAdjointEigenSolver<Mat> eig(D.transpose() * D, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double transposition_residual(const Forms& forms, const Vec& u, const Vec& g, const Vec& v) {
    require_length(u, forms.n_interior(), "transposition_residual: u");
    require_length(g, forms.n_collar(), "transposition_residual: g");
    require_length(v, forms.n_interior(), "transposition_residual: v");
    const Vec v_nodes = forms.grid.join(v, Vec::Zero(forms.n_collar()));
    const double h = forms.h();
    const Vec lap = apply_fractional_laplacian(forms, v_nodes);
    const Vec flux = nonlocal_normal_derivative(forms, v_nodes);
    return std::abs(u.dot(lap) * h + g.dot(flux) * h);
}

Vec steady_gradient(Variant variant, const Forms& forms, const Vec& u_d, const Vec& g) {
    require_length(u_d, forms.n_interior(), "steady_gradient: u_d");
    require_length(g, forms.n_collar(), "steady_gradient: g");
    const auto mask = control_mask(variant, forms);
    Vec grad(forms.n_collar());
    if (variant == Variant::robin) {
        const auto llt = factor_robin(forms);
        const Vec rhs = forms.grid.join(forms.mass_interior.cwiseProduct(Vec::Zero(forms.n_interior())),
                                        forms.mass_mu.cwiseProduct(g));
        const Vec x = llt.solve(rhs);
        const Vec src = node_mass(forms).cwiseProduct(x - forms.grid.join(u_d, Vec::Zero(forms.n_collar())));
        const Vec psi = llt.solve(src);
        grad = g + forms.grid.collar(psi);
    } else {
        const Vec u = dirichlet_map(forms, g);
        const Vec lambda = forms.A_II_llt.solve(forms.mass_interior.cwiseProduct(u - u_d));
        grad = g - forms.A_EI * lambda / forms.h();
    }
    for (Eigen::Index c = 0; c < grad.size(); ++c)
        if (!mask[static_cast<std::size_t>(c)]) grad[c] = 0;
    return grad;
}

double steady_cost(Variant variant, const Forms& forms, const Vec& u_d, const Vec& g) {
    Vec u;
    if (variant == Variant::robin)
        u = forms.grid.interior(solve_robin_steady(forms, Vec::Zero(forms.n_interior()), g));
    else
        u = dirichlet_map(forms, g);
    const Vec w = control_weights(variant, forms);
    return 0.5 * (u - u_d).cwiseAbs2().dot(forms.mass_interior) + 0.5 * g.cwiseAbs2().dot(w);
}

SteadyTriple solve_steady_optimality(Variant variant, const Forms& forms, const Vec& u_d) {
    require_length(u_d, forms.n_interior(), "solve_steady_optimality: u_d");
    const Eigen::Index n = forms.n_interior();
    const Eigen::Index ne = forms.n_collar();
    const double h = forms.h();

    SteadyTriple out;
    out.variant = variant;
    Mat K;
    Vec rhs;

    if (variant == Variant::robin) {
        factor_robin(forms);  // rejects the singular configuration with a named diagnosis
        const Eigen::Index N = forms.n_nodes();
        std::vector<Eigen::Index> active;
        for (Eigen::Index c = 0; c < ne; ++c)
            if (forms.beta.values[c] > 0) active.push_back(c);
        const auto na = static_cast<Eigen::Index>(active.size());

        // Unknowns [x (all nodes), g (active collar), psi (all nodes)].
        K.setZero(2 * N + na, 2 * N + na);
        const Vec D = node_mass(forms);
        K.topLeftCorner(N, N) = D.asDiagonal();
        K.block(0, N + na, N, N) = -forms.full;
        K.block(N + na, 0, N, N) = -forms.full;
        for (Eigen::Index a = 0; a < na; ++a) {
            const Eigen::Index c = active[static_cast<std::size_t>(a)];
            const Eigen::Index node = forms.grid.collar_node(c);
            const double m = forms.mass_mu[c];
            K(N + a, N + a) = m;
            K(N + a, N + na + node) = m;
            K(N + na + node, N + a) = m;
        }
        rhs = Vec::Zero(2 * N + na);
        rhs.head(N) = D.cwiseProduct(forms.grid.join(u_d, Vec::Zero(ne)));

        Eigen::PartialPivLU<Mat> lu(K);
        const Vec z = lu.solve(rhs);
        out.u_bar = forms.grid.interior(z.head(N));
        out.g_bar = Vec::Zero(ne);
        for (Eigen::Index a = 0; a < na; ++a) out.g_bar[active[static_cast<std::size_t>(a)]] = z[N + a];
        out.adj_bar = forms.grid.interior(z.tail(N));
        out.kkt_residual = rhs.norm() == 0 ? (K * z).norm() : (K * z - rhs).norm() / rhs.norm();
    } else {
        // Unknowns [u (interior), g (collar), lambda (interior)].
        K.setZero(2 * n + ne, 2 * n + ne);
        K.topLeftCorner(n, n) = forms.mass_interior.asDiagonal();
        K.block(n, n, ne, ne).diagonal().setConstant(h);
        K.block(0, n + ne, n, n) = -forms.A_II;
        K.block(n, n + ne, ne, n) = -forms.A_EI;
        K.block(n + ne, 0, n, n) = -forms.A_II;
        K.block(n + ne, n, n, ne) = -forms.A_IE;
        rhs = Vec::Zero(2 * n + ne);
        rhs.head(n) = forms.mass_interior.cwiseProduct(u_d);

        Eigen::PartialPivLU<Mat> lu(K);
        const Vec z = lu.solve(rhs);
        out.u_bar = z.head(n);
        out.g_bar = z.segment(n, ne);
        out.adj_bar = z.tail(n);
        out.kkt_residual = rhs.norm() == 0 ? (K * z).norm() : (K * z - rhs).norm() / rhs.norm();
    }

    if (!std::isfinite(out.kkt_residual) || out.kkt_residual > 1e-10) {
        std::ostringstream os;
        os << "solve_steady_optimality: KKT residual " << out.kkt_residual << " exceeds 1e-10";
        throw SolveError(os.str());
    }
    return out;
}

}  // namespace fraclab
