#pragma once

#include <memory>

#include "fraclab/evolution.hpp"

namespace fraclab {

/// Finite-horizon LQ problem:  min 1/2 sum_k tau (|u_k - u_d|^2 + |g_k|^2_W),  k = 1..K.
///
/// u0 and terminal default to zero (empty vectors).  A nonzero terminal value phi adds the
/// linear term tau <phi, B x_K> to the cost so that the adjoint ends at phi; it is only
/// used by the solution-map probe.
struct ControlProblem {
    Variant variant = Variant::robin;
    std::shared_ptr<const Forms> forms;
    Vec u_d;
    TimeGrid tg;
    double cg_tol = 1e-10;
    int max_iter = 500;
    Vec u0;
    Vec terminal;

    void validate() const;
};

struct OptimalSolution {
    Trajectory trajectory;  // state, control and adjoint at the optimum
    double cost = 0;
    double grad_norm = 0;
    int iterations = 0;
};

/// Thrown when CG exhausts max_iter; keeps the last iterate.
class ConvergenceError : public SolveError {
public:
    ConvergenceError(const std::string& what, Mat last_control, double grad_norm)
        : SolveError(what), last_control(std::move(last_control)), grad_norm(grad_norm) {}
    Mat last_control;
    double grad_norm;
};

/// Time-L^2 norm of a control series in the W inner product:  sqrt(sum_{k>=1} tau |g_k|_W^2).
double control_norm(const ControlProblem& problem, const Mat& g);

double evaluate_cost(const ControlProblem& problem, const Mat& g);

/// Gradient of the discrete cost in the W inner product.  Column 0 is zero and Robin
/// nodes with beta = 0 carry no control, so their rows are zero as well.
Mat reduced_gradient(const ControlProblem& problem, const Mat& g);

/// Conjugate gradients on the reduced cost.  Deterministic for a fixed problem.
OptimalSolution solve_optimal(const ControlProblem& problem);

/// max_k |g_k + trace_k|_W for the control stored in `sol`.
double optimality_residual(const ControlProblem& problem, const OptimalSolution& sol);

}  // namespace fraclab
