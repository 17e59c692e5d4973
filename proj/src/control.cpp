#include "fraclab/control.hpp"

#include <cmath>
#include <sstream>

namespace fraclab {

void ControlProblem::validate() const {
    if (!forms) throw ConsistencyError("control problem: missing form matrices");
    Grid1D<double>::check_length(u_d.size(), forms->n_interior(), "control problem: u_d");
    if (!u_d.allFinite()) throw DomainError("control problem: u_d must be finite");
    if (!(cg_tol > 0)) throw DomainError("control problem: cg_tol must be positive");
    if (max_iter < 1) throw DomainError("control problem: max_iter must be >= 1");
    if (u0.size() != 0) Grid1D<double>::check_length(u0.size(), forms->n_interior(), "control problem: u0");
    if (terminal.size() != 0)
        Grid1D<double>::check_length(terminal.size(), forms->n_interior(), "control problem: terminal");
    make_time_grid(tg.T, tg.K, tg.theta);
}

namespace {

// Everything needed to evaluate the reduced cost and its gradient repeatedly.
struct Reduced {
    const ControlProblem& p;
    const Forms& f;
    ParabolicStepper stepper;
    Vec w;     // control weights
    Vec mask;  // 1 on nodes carrying a control, 0 elsewhere
    Vec u0;
    Vec terminal;

    explicit Reduced(const ControlProblem& problem)
        : p(problem), f(*problem.forms), stepper(f, problem.variant, problem.tg) {
        w = control_weights(p.variant, f);
        const auto on = control_mask(p.variant, f);
        mask.resize(f.n_collar());
        for (Eigen::Index c = 0; c < mask.size(); ++c) mask[c] = on[static_cast<std::size_t>(c)] ? 1.0 : 0.0;
        u0 = p.u0.size() ? p.u0 : Vec::Zero(f.n_interior());
        terminal = p.terminal.size() ? p.terminal : Vec::Zero(f.n_interior());
    }

    Mat admissible(const Mat& g) const {
        if (g.rows() != f.n_collar() || g.cols() != p.tg.K + 1)
            throw ConsistencyError("control series must be n_collar x (K+1)");
        Mat out = mask.asDiagonal() * g;
        out.col(0).setZero();
        return out;
    }

    double inner(const Mat& a, const Mat& b) const {
        double s = 0;
        for (int k = 1; k <= p.tg.K; ++k) s += a.col(k).dot(w.cwiseProduct(b.col(k)));
        return p.tg.tau * s;
    }

    double cost(const Mat& g, Trajectory& traj) const {
        stepper.forward(g, u0, traj);
        double s = 0;
        for (int k = 1; k <= p.tg.K; ++k) {
            const Vec r = traj.state.col(k) - p.u_d;
            s += r.cwiseAbs2().dot(f.mass_interior) + g.col(k).cwiseAbs2().dot(w);
        }
        double j = 0.5 * p.tg.tau * s;
        if (p.terminal.size()) j += stepper.terminal_pairing(terminal, traj);
        return j;
    }

    // Gradient at g; leaves the full forward/backward trajectory in `traj`.
    Mat gradient(const Mat& g, Trajectory& traj) const {
        stepper.forward(g, u0, traj);
        Mat source = traj.state.colwise() - p.u_d;
        source.col(0).setZero();
        stepper.backward(source, terminal, traj);
        Mat grad = mask.asDiagonal() * (g + stepper.adjoint_trace(traj));
        grad.col(0).setZero();
        return grad;
    }

    double max_step_norm(const Mat& grad) const {
        double m = 0;
        for (int k = 1; k <= p.tg.K; ++k) m = std::max(m, std::sqrt(grad.col(k).cwiseAbs2().dot(w)));
        return m;
    }
};

}  // namespace

double control_norm(const ControlProblem& problem, const Mat& g) {
    problem.validate();
    const Reduced red(problem);
    return std::sqrt(red.inner(g, g));
}

double evaluate_cost(const ControlProblem& problem, const Mat& g) {
    problem.validate();
    const Reduced red(problem);
    Trajectory traj;
    return red.cost(red.admissible(g), traj);
}

Mat reduced_gradient(const ControlProblem& problem, const Mat& g) {
    problem.validate();
    const Reduced red(problem);
    Trajectory traj;
    return red.gradient(red.admissible(g), traj);
}

OptimalSolution solve_optimal(const ControlProblem& problem) {
    problem.validate();
    const Reduced red(problem);
    const Eigen::Index ne = red.f.n_collar();
    const int K = problem.tg.K;

    Trajectory traj;
    Mat g = Mat::Zero(ne, K + 1);
    const Mat grad0 = red.gradient(g, traj);  // affine offset: grad(g) = H g + grad0
    Mat r = -grad0;
    double true_norm = red.max_step_norm(grad0);
    int iters = 0;

    // Restarted CG: the recursive residual is re-synchronized with the true gradient
    // whenever it claims convergence, so the reported norm is never a recursion artefact.
    while (true_norm > problem.cg_tol) {
        Mat d = r;
        double rr = red.inner(r, r);
        bool restart = false;
        while (!restart) {
            if (iters >= problem.max_iter) {
                std::ostringstream os;
                os << "conjugate gradients did not converge in " << problem.max_iter
                   << " iterations (T = " << problem.tg.T << ", gradient norm " << true_norm << ")";
                throw ConvergenceError(os.str(), g, true_norm);
            }
            const Mat Hd = red.gradient(d, traj) - grad0;
            const double dHd = red.inner(d, Hd);
            if (!(dHd > 0)) throw SolveError("conjugate gradients: reduced Hessian lost positivity");
            const double alpha = rr / dHd;
            g += alpha * d;
            r -= alpha * Hd;
            ++iters;
            const double rr_new = red.inner(r, r);
            if (red.max_step_norm(r) <= problem.cg_tol) {
                restart = true;
            } else {
                d = r + (rr_new / rr) * d;
                rr = rr_new;
            }
        }
        r = -red.gradient(g, traj);
        true_norm = red.max_step_norm(r);
    }

    OptimalSolution sol;
    Trajectory scratch;
    sol.cost = red.cost(g, scratch);
    sol.trajectory = std::move(traj);  // forward and adjoint of the final iterate
    sol.grad_norm = true_norm;
    sol.iterations = iters;
    return sol;
}

double optimality_residual(const ControlProblem& problem, const OptimalSolution& sol) {
    problem.validate();
    const Reduced red(problem);
    Trajectory traj;
    const Mat grad = red.gradient(red.admissible(sol.trajectory.control), traj);
    return red.max_step_norm(grad);
}

}  // namespace fraclab
