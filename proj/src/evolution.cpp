#include "fraclab/evolution.hpp"

#include <cmath>

namespace fraclab {

TimeGrid make_time_grid(double T, int K, double theta) {
    if (!(T > 0) || !std::isfinite(T)) throw DomainError("time grid: T must be positive");
    if (K < 2) throw DomainError("time grid: need K >= 2 steps");
    if (!(theta >= 0.5 && theta <= 1.0)) throw DomainError("time grid: theta must lie in [1/2, 1]");
    return {T, K, T / static_cast<double>(K), theta};
}

ParabolicStepper::ParabolicStepper(const Forms& forms, Variant variant, TimeGrid tg)
    : forms_(&forms), variant_(variant), tg_(tg) {
    const double tau = tg_.tau;
    const double theta = tg_.theta;
    if (variant_ == Variant::robin) {
        if (forms.spec.tail.is_constant() && (forms.beta.values.array() == 0).all())
            throw DegeneracyError("robin evolution: beta vanishes on the whole collar with a constant tail");
        const Vec d = forms.grid.join(forms.mass_interior / tau, Vec::Zero(forms.n_collar()));
        system_ = theta * forms.full;
        system_.diagonal() += d;
        explicit_ = -(1.0 - theta) * forms.full;
        explicit_.diagonal() += d;
    } else {
        system_ = theta * forms.A_II;
        system_.diagonal() += forms.mass_interior / tau;
        explicit_ = -(1.0 - theta) * forms.A_II;
        explicit_.diagonal() += forms.mass_interior / tau;
    }
    llt_.compute(system_);
    if (llt_.info() != Eigen::Success) throw SolveError("parabolic stepper: factorization failed");
}

Vec ParabolicStepper::interior_source(const Mat* source, int k_new) const {
    const Forms& f = *forms_;
    if (source == nullptr) return Vec::Zero(f.n_interior());
    const double theta = tg_.theta;
    Vec s = theta * source->col(k_new);
    if (theta < 1.0) s += (1.0 - theta) * source->col(k_new - 1);
    return f.mass_interior.cwiseProduct(s);
}

void ParabolicStepper::forward(const Mat& control, const Vec& u0, Trajectory& out, const Mat* source,
                               double* max_residual) const {
    const Forms& f = *forms_;
    const int K = tg_.K;
    const Eigen::Index n = f.n_interior();
    const Eigen::Index ne = f.n_collar();
    if (control.rows() != ne || control.cols() != K + 1)
        throw ConsistencyError("forward: control must be n_collar x (K+1)");
    if (u0.size() != n) throw ConsistencyError("forward: initial state must live on the interior");
    if (source && (source->rows() != n || source->cols() != K + 1))
        throw ConsistencyError("forward: source must be n_interior x (K+1)");

    const double theta = tg_.theta;
    out.variant = variant_;
    out.tg = tg_;
    out.times = Vec::LinSpaced(K + 1, 0.0, tg_.T);
    out.control = control;
    out.state.resize(n, K + 1);
    out.exterior.resize(ne, K + 1);
    double worst = 0;

    if (variant_ == Variant::robin) {
        // Consistent initial collar values: the algebraic rows hold at t_0 as well.
        Vec x0_collar = (f.mass_mu.cwiseProduct(control.col(0)) - f.A_EI * u0).cwiseQuotient(f.A_EE.diagonal());
        Vec x = f.grid.join(u0, x0_collar);
        out.state.col(0) = u0;
        out.exterior.col(0) = x0_collar;
        for (int k = 0; k < K; ++k) {
            Vec g_theta = theta * control.col(k + 1);
            if (theta < 1.0) g_theta += (1.0 - theta) * control.col(k);
            const Vec load = f.grid.join(interior_source(source, k + 1), f.mass_mu.cwiseProduct(g_theta));
            const Vec rhs = explicit_ * x + load;
            x = llt_.solve(rhs);
            if (max_residual) worst = std::max(worst, (system_ * x - rhs).norm() / std::max(rhs.norm(), 1e-300));
            out.state.col(k + 1) = f.grid.interior(x);
            out.exterior.col(k + 1) = f.grid.collar(x);
        }
    } else {
        Vec u = u0;
        out.state.col(0) = u0;
        out.exterior = control;
        for (int k = 0; k < K; ++k) {
            Vec g_theta = theta * control.col(k + 1);
            if (theta < 1.0) g_theta += (1.0 - theta) * control.col(k);
            const Vec rhs = explicit_ * u - f.A_IE * g_theta + interior_source(source, k + 1);
            u = llt_.solve(rhs);
            if (max_residual) worst = std::max(worst, (system_ * u - rhs).norm() / std::max(rhs.norm(), 1e-300));
            out.state.col(k + 1) = u;
        }
    }
    if (max_residual) *max_residual = worst;
}

void ParabolicStepper::backward(const Mat& source, const Vec& terminal, Trajectory& out,
                                double* max_residual) const {
    const Forms& f = *forms_;
    const int K = tg_.K;
    const Eigen::Index n = f.n_interior();
    const Eigen::Index ne = f.n_collar();
    if (source.rows() != n || source.cols() != K + 1)
        throw ConsistencyError("backward: source must be n_interior x (K+1)");
    if (terminal.size() != n) throw ConsistencyError("backward: terminal value must live on the interior");

    out.adjoint.resize(n, K + 1);
    out.adjoint_exterior.resize(ne, K + 1);
    double worst = 0;

    // Column j is the multiplier of step j -> j+1 (rescaled by 1/tau); it approximates the
    // adjoint at t_j.  The terminal value sits in column K.
    if (variant_ == Variant::robin) {
        Vec y = robin_extended(f, terminal);
        out.adjoint.col(K) = terminal;
        out.adjoint_exterior.col(K) = f.grid.collar(y);
        for (int j = K - 1; j >= 0; --j) {
            const Vec load = f.grid.join(f.mass_interior.cwiseProduct(source.col(j + 1)), Vec::Zero(ne));
            const Vec rhs = explicit_ * y + load;
            y = llt_.solve(rhs);
            if (max_residual) worst = std::max(worst, (system_ * y - rhs).norm() / std::max(rhs.norm(), 1e-300));
            out.adjoint.col(j) = f.grid.interior(y);
            out.adjoint_exterior.col(j) = f.grid.collar(y);
        }
    } else {
        Vec y = terminal;
        out.adjoint.col(K) = terminal;
        out.adjoint_exterior.setZero();
        for (int j = K - 1; j >= 0; --j) {
            const Vec rhs = explicit_ * y + f.mass_interior.cwiseProduct(source.col(j + 1));
            y = llt_.solve(rhs);
            if (max_residual) worst = std::max(worst, (system_ * y - rhs).norm() / std::max(rhs.norm(), 1e-300));
            out.adjoint.col(j) = y;
        }
    }
    if (max_residual) *max_residual = worst;
}

Mat ParabolicStepper::adjoint_trace(const Trajectory& traj) const {
    const Forms& f = *forms_;
    const int K = tg_.K;
    const double theta = tg_.theta;
    if (traj.adjoint.cols() != K + 1) throw ConsistencyError("adjoint_trace: adjoint not computed");
    Mat trace = Mat::Zero(f.n_collar(), K + 1);
    for (int k = 1; k <= K; ++k) {
        if (variant_ == Variant::robin) {
            trace.col(k) = theta * traj.adjoint_exterior.col(k - 1);
            if (theta < 1.0 && k < K) trace.col(k) += (1.0 - theta) * traj.adjoint_exterior.col(k);
        } else {
            Vec lam = theta * traj.adjoint.col(k - 1);
            if (theta < 1.0 && k < K) lam += (1.0 - theta) * traj.adjoint.col(k);
            trace.col(k) = -(f.A_EI * lam) / f.h();
        }
    }
    return trace;
}

double ParabolicStepper::terminal_pairing(const Vec& phi, const Trajectory& traj) const {
    const Forms& f = *forms_;
    const int K = tg_.K;
    if (variant_ == Variant::robin) {
        const Vec y = robin_extended(f, phi);
        const Vec x = f.grid.join(traj.state.col(K), traj.exterior.col(K));
        return tg_.tau * y.dot(explicit_ * x);
    }
    return tg_.tau * phi.dot(explicit_ * traj.state.col(K));
}

Trajectory solve_parabolic_robin(const Forms& forms, const Mat& g, const Vec& u0, const TimeGrid& tg) {
    const ParabolicStepper stepper(forms, Variant::robin, tg);
    Trajectory out;
    stepper.forward(g, u0, out);
    return out;
}

Trajectory solve_parabolic_dirichlet(const Forms& forms, const Mat& g, const TimeGrid& tg) {
    const ParabolicStepper stepper(forms, Variant::dirichlet, tg);
    Trajectory out;
    stepper.forward(g, Vec::Zero(forms.n_interior()), out);
    return out;
}

Mat solve_adjoint(Variant variant, const Forms& forms, const Mat& source, const TimeGrid& tg) {
    const ParabolicStepper stepper(forms, variant, tg);
    Trajectory out;
    stepper.backward(source, Vec::Zero(forms.n_interior()), out);
    return out.adjoint;
}

Vec control_operator(const Forms& forms, const Vec& g) {
    Grid1D<double>::check_length(g.size(), forms.n_collar(), "control_operator");
    return -(forms.A_IE * g) / forms.h();
}

Vec control_operator_adjoint(const Forms& forms, const Vec& phi) {
    Grid1D<double>::check_length(phi.size(), forms.n_interior(), "control_operator_adjoint");
    const Vec z = forms.A_II_llt.solve(forms.mass_interior.cwiseProduct(phi));
    return -(forms.A_EI * z) / forms.h();
}

}  // namespace fraclab
