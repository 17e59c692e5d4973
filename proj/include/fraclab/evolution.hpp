#pragma once

#include "fraclab/common.hpp"

namespace fraclab {

struct TimeGrid {
    double T = 1;
    int K = 2;
    double tau = 0.5;
    double theta = 1;

    double time(int k) const { return T * static_cast<double>(k) / static_cast<double>(K); }
};

/// Uniform time grid with K steps on [0,T]; theta in [1/2, 1].
TimeGrid make_time_grid(double T, int K, double theta = 1.0);

/// Time series are stored column-wise: column k holds the value at t_k, k = 0..K.
///
/// control column 0 is the datum at the initial level; it only enters the
/// scheme when theta < 1 and is zero on the optimal-control path.
/// adjoint column k is the adjoint at t_k with column K the terminal value.
struct Trajectory {
    Variant variant = Variant::robin;
    TimeGrid tg;
    Vec times;
    Mat state;             // interior x (K+1)
    Mat exterior;          // collar x (K+1): Robin extension of the state, or the imposed Dirichlet datum
    Mat control;           // collar x (K+1)
    Mat adjoint;           // interior x (K+1), empty until an adjoint solve
    Mat adjoint_exterior;  // collar x (K+1): Robin extension of the adjoint (zero for Dirichlet)
};

/// Theta-scheme for the Robin DAE or the Dirichlet heat equation on fixed forms and time grid.
/// Holds one factorization of M/tau + theta*A; read-only after construction.
class ParabolicStepper {
public:
    ParabolicStepper(const Forms& forms, Variant variant, TimeGrid tg);

    const Forms& forms() const { return *forms_; }
    Variant variant() const { return variant_; }
    const TimeGrid& time_grid() const { return tg_; }

    /// Forward solve.  `control` is collar x (K+1); `source` (optional, interior x (K+1))
    /// adds M f to the interior rows, theta-weighted.  Fills state and exterior of `out`.
    void forward(const Mat& control, const Vec& u0, Trajectory& out,
                 const Mat* source = nullptr, double* max_residual = nullptr) const;

    /// Backward adjoint solve with source (interior x (K+1), column k sampled at t_k, column 0
    /// unused) and terminal value at T.  Fills adjoint and adjoint_exterior of `out`.
    void backward(const Mat& source, const Vec& terminal, Trajectory& out,
                  double* max_residual = nullptr) const;

    /// Adjoint trace paired with each control level (column 0 is zero): the Robin collar
    /// values, or -N_h(lambda) for Dirichlet.  Gradient of the cost = control + trace.
    Mat adjoint_trace(const Trajectory& traj) const;

    /// tau <phi, B x_K> with B the explicit step matrix; phi is Robin-extended for the Robin
    /// variant.  Its derivative in x_K is what a terminal adjoint value phi feeds back.
    double terminal_pairing(const Vec& phi, const Trajectory& traj) const;

private:
    Vec interior_source(const Mat* source, int k_new) const;

    const Forms* forms_;
    Variant variant_;
    TimeGrid tg_;
    Mat system_;     // M/tau + theta A  (nodes for Robin, interior for Dirichlet)
    Mat explicit_;   // M/tau - (1-theta) A
    Eigen::LLT<Mat> llt_;
};

/// Forward Robin solve: state rows with Robin exterior rows N_h u + beta u = beta g.
Trajectory solve_parabolic_robin(const Forms& forms, const Mat& g, const Vec& u0, const TimeGrid& tg);

/// Forward Dirichlet solve with zero initial state and exterior datum g.
Trajectory solve_parabolic_dirichlet(const Forms& forms, const Mat& g, const TimeGrid& tg);

/// Backward adjoint solve with zero terminal value.  `source` column k is u_k - u_d.
Mat solve_adjoint(Variant variant, const Forms& forms, const Mat& source, const TimeGrid& tg);

/// Discrete control operator B = A D:  B g = -A_IE g / h.
Vec control_operator(const Forms& forms, const Vec& g);

/// B* phi = -N_h(A_II^{-1} M phi), adjoint of B between L^2(collar) and the H^{-s} pairing.
Vec control_operator_adjoint(const Forms& forms, const Vec& phi);

}  // namespace fraclab
