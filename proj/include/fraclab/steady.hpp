#pragma once

#include "fraclab/common.hpp"

namespace fraclab {

/// Stationary optimum: state on Omega, control on the collar, adjoint on Omega
/// (psi-bar for Robin, lambda-bar for Dirichlet).
struct SteadyTriple {
    Variant variant = Variant::robin;
    Vec u_bar;
    Vec g_bar;
    Vec adj_bar;
    double kkt_residual = 0;
};

/// Solve full * x = [h f ; M_mu g] for the Robin exterior-value problem.  Returns all nodes.
Vec solve_robin_steady(const Forms& forms, const Vec& f, const Vec& g);

/// Discrete Dirichlet map  u = -A_II^{-1} A_IE g.
Vec dirichlet_map(const Forms& forms, const Vec& g);

/// Operator norm of the Dirichlet map from L^2(collar) to L^2(Omega).
double dirichlet_map_norm(const Forms& forms);

/// |sum_Omega u (-Delta)^s_h v h + sum_collar g N_h v h| for v with zero collar values.
double transposition_residual(const Forms& forms, const Vec& u, const Vec& g, const Vec& v);

/// Reduced gradient of the stationary cost at g, in the control inner product.
Vec steady_gradient(Variant variant, const Forms& forms, const Vec& u_d, const Vec& g);

/// Stationary cost J(g) = 1/2 |u - u_d|^2 + 1/2 |g|^2_{control}.
double steady_cost(Variant variant, const Forms& forms, const Vec& u_d, const Vec& g);

/// Solve the coupled KKT system of the stationary control problem.
SteadyTriple solve_steady_optimality(Variant variant, const Forms& forms, const Vec& u_d);

}  // namespace fraclab
