#pragma once

// Collocation discretization of the fractional Laplacian on a 1-D interval
// Omega = (a, b) together with a finite exterior collar.  Nodes are cell
// centred with spacing h and ordered [left collar | interior | right collar].
//
// The discrete bilinear form is a weighted graph Laplacian: every pair of
// nodes (i, j) with at least one interior node is an edge with weight
//   w_ij = C_{1,s} h^2 |x_i - x_j|^{-1-2s}.
// Collar-collar pairs carry no edge, mirroring the exclusion of the
// exterior-exterior square from the energy form.  What lies beyond the collar
// is modelled by a TailMode and folded into the matrix analytically.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fraclab/errors.hpp"

namespace fraclab {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Exterior datum assumed beyond the truncated collar.
///
/// zero:      the datum vanishes beyond the collar; interior nodes see the far
///            field as pure diagonal stiffness.
/// constant:  the datum beyond each end of the collar continues the value at
///            the outermost collar node, so the far-field interaction becomes an
///            edge to that node and the stiffness annihilates constants.  `value`
///            is the constant exterior datum c the caller intends to impose.
struct TailMode {
    enum class Kind { zero, constant };

    Kind kind = Kind::zero;
    double value = 0.0;

    static TailMode zero() { return {}; }
    static TailMode constant(double c) { return {Kind::constant, c}; }

    bool is_constant() const { return kind == Kind::constant; }
};

template <typename Scalar = double>
struct DomainSpec {
    Scalar a = -1;
    Scalar b = 1;
    Scalar collar_width = 1;
    Scalar s = 0.5;
    TailMode tail{};

    void validate() const {
        if (!(a < b)) throw DomainError("domain: require a < b");
        if (!(collar_width > 0)) throw DomainError("domain: collar width must be positive");
        if (!(s > 0 && s < 1)) throw DomainError("domain: fractional order s must lie in (0,1)");
        if (tail.is_constant() && !std::isfinite(tail.value))
            throw DomainError("domain: constant tail value must be finite");
    }

    /// Orders above this value are accepted but lie outside the range the quadrature was validated on.
    static constexpr double validated_s_max = 0.8;
    bool outside_validated_range() const { return s > Scalar(validated_s_max); }
};

enum class NodeKind : unsigned char { interior, collar };

template <typename Scalar = double>
struct Grid1D {
    Scalar h = 0;
    Eigen::Index n_interior = 0;
    Eigen::Index collar_per_side = 0;
    Vector<Scalar> nodes;  // all nodes, strictly increasing

    Eigen::Index size() const { return nodes.size(); }
    Eigen::Index n_collar() const { return 2 * collar_per_side; }
    Eigen::Index first_interior() const { return collar_per_side; }

    NodeKind kind(Eigen::Index i) const {
        return (i >= collar_per_side && i < collar_per_side + n_interior) ? NodeKind::interior
                                                                          : NodeKind::collar;
    }
    bool is_interior(Eigen::Index i) const { return kind(i) == NodeKind::interior; }

    /// Node index of the c-th collar node (collar vectors are ordered left to right).
    Eigen::Index collar_node(Eigen::Index c) const {
        return c < collar_per_side ? c : c + n_interior;
    }

    auto interior_nodes() const { return nodes.segment(collar_per_side, n_interior); }

    Vector<Scalar> collar_nodes() const { return collar(nodes); }

    std::vector<Eigen::Index> interior_indices() const {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_interior));
        for (Eigen::Index i = 0; i < n_interior; ++i) idx[static_cast<std::size_t>(i)] = collar_per_side + i;
        return idx;
    }

    std::vector<Eigen::Index> collar_indices() const {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_collar()));
        for (Eigen::Index c = 0; c < n_collar(); ++c) idx[static_cast<std::size_t>(c)] = collar_node(c);
        return idx;
    }

    template <typename Derived>
    Vector<Scalar> interior(const Eigen::MatrixBase<Derived>& x) const {
        check_length(x.size(), size(), "node vector");
        return x.segment(collar_per_side, n_interior);
    }

    template <typename Derived>
    Vector<Scalar> collar(const Eigen::MatrixBase<Derived>& x) const {
        check_length(x.size(), size(), "node vector");
        Vector<Scalar> out(n_collar());
        out << x.head(collar_per_side), x.tail(collar_per_side);
        return out;
    }

    /// Assemble a node vector from interior and collar parts.
    template <typename D1, typename D2>
    Vector<Scalar> join(const Eigen::MatrixBase<D1>& interior_part,
                        const Eigen::MatrixBase<D2>& collar_part) const {
        check_length(interior_part.size(), n_interior, "interior vector");
        check_length(collar_part.size(), n_collar(), "collar vector");
        Vector<Scalar> x(size());
        x << collar_part.head(collar_per_side), interior_part, collar_part.tail(collar_per_side);
        return x;
    }

    static void check_length(Eigen::Index got, Eigen::Index want, const char* what) {
        if (got != want) {
            std::ostringstream os;
            os << what << ": expected length " << want << ", got " << got;
            throw ConsistencyError(os.str());
        }
    }
};

/// Uniform cell-centred grid with `n_interior` cells in (a,b) and floor(R/h) collar cells per side.
template <typename Scalar>
Grid1D<Scalar> make_grid(const DomainSpec<Scalar>& spec, Eigen::Index n_interior) {
    spec.validate();
    if (n_interior < 1) throw DomainError("grid: need at least one interior node");
    Grid1D<Scalar> g;
    g.n_interior = n_interior;
    g.h = (spec.b - spec.a) / Scalar(n_interior);
    g.collar_per_side =
        static_cast<Eigen::Index>(std::floor(spec.collar_width / g.h + Scalar(1e-9)));
    if (g.collar_per_side < 1)
        throw DomainError("grid: collar narrower than one cell; refine the grid or widen the collar");
    const Eigen::Index m = g.collar_per_side;
    g.nodes.resize(n_interior + 2 * m);
    for (Eigen::Index k = 0; k < g.nodes.size(); ++k)
        g.nodes[k] = spec.a + (Scalar(k - m) + Scalar(0.5)) * g.h;
    return g;
}

/// Nonnegative exterior coefficient on the collar nodes (dmu = beta dx).
template <typename Scalar = double>
struct BetaField {
    Vector<Scalar> values;

    static BetaField constant(Eigen::Index n_collar, Scalar value) {
        return {Vector<Scalar>::Constant(n_collar, value)};
    }

    void validate() const {
        for (Eigen::Index i = 0; i < values.size(); ++i)
            if (!(values[i] >= 0) || !std::isfinite(values[i]))
                throw DomainError("beta: values must be finite and nonnegative");
    }

    /// Collar nodes that carry a control unknown in the Robin problem.
    std::vector<bool> active() const {
        std::vector<bool> on(static_cast<std::size_t>(values.size()));
        for (Eigen::Index i = 0; i < values.size(); ++i) on[static_cast<std::size_t>(i)] = values[i] > 0;
        return on;
    }
};

/// C_{N,s} = s 2^{2s} Gamma((2s+N)/2) / (pi^{N/2} Gamma(1-s)).
template <typename Scalar>
Scalar normalization_constant(int N, Scalar s) {
    if (N < 1) throw DomainError("normalization_constant: dimension must be >= 1");
    if (!(s > 0 && s < 1)) throw DomainError("normalization_constant: s must lie in (0,1)");
    using std::pow;
    using std::tgamma;
    const Scalar half_n = Scalar(N) / Scalar(2);
    return s * pow(Scalar(2), Scalar(2) * s) * tgamma(s + half_n) /
           (pow(std::numbers::pi_v<Scalar>, half_n) * tgamma(Scalar(1) - s));
}

/// rho(x) = int_a^b |x-y|^{-1-2s} dy for x outside [a,b], in closed form.
template <typename Scalar>
Scalar kernel_tail_rho(Scalar x, const DomainSpec<Scalar>& spec) {
    if (x >= spec.a && x <= spec.b) throw DomainError("kernel_tail_rho: x must lie outside [a,b]");
    using std::pow;
    const Scalar two_s = Scalar(2) * spec.s;
    const Scalar near = x > spec.b ? x - spec.b : spec.a - x;
    const Scalar far = x > spec.b ? x - spec.a : spec.b - x;
    return (pow(near, -two_s) - pow(far, -two_s)) / two_s;
}

/// Discrete forms on a grid.  Immutable after assembly and safe to share across threads.
template <typename Scalar = double>
struct FormMatrices {
    Grid1D<Scalar> grid;
    DomainSpec<Scalar> spec;
    BetaField<Scalar> beta;
    Scalar kernel_constant = 0;  // C_{1,s}

    Matrix<Scalar> stiffness;       // Gagliardo double sum plus far-field tail
    Matrix<Scalar> full;            // stiffness with beta*h added on the collar diagonal
    Vector<Scalar> mass_interior;   // lumped, h per node
    Vector<Scalar> mass_mu;         // lumped collar mass weighted by beta

    // Blocks of `full`.  A_EE is diagonal because collar nodes only couple to Omega.
    Matrix<Scalar> A_II, A_IE, A_EI, A_EE;
    Eigen::LLT<Matrix<Scalar>> A_II_llt;

    Scalar h() const { return grid.h; }
    Eigen::Index n_interior() const { return grid.n_interior; }
    Eigen::Index n_collar() const { return grid.n_collar(); }
    Eigen::Index n_nodes() const { return grid.size(); }
};

namespace detail {

template <typename Scalar>
struct PairWeights {
    const Grid1D<Scalar>& grid;
    Scalar c;
    Scalar exponent;     // -1-2s
    Scalar two_s;
    Scalar lo, hi;       // outer ends of the collar
    bool constant_tail;

    // Far-field integral beyond each collar end, seen from x.
    Scalar tail_left(Scalar x) const { return std::pow(x - lo, -two_s) / two_s; }
    Scalar tail_right(Scalar x) const { return std::pow(hi - x, -two_s) / two_s; }

    // Symmetric in (i, j) bit for bit: the same expression is evaluated whichever row asks.
    Scalar operator()(Eigen::Index i, Eigen::Index j) const {
        const bool ii = grid.is_interior(i);
        const bool jj = grid.is_interior(j);
        if (!ii && !jj) return Scalar(0);
        const Scalar h = grid.h;
        Scalar w = c * h * h * std::pow(std::abs(grid.nodes[i] - grid.nodes[j]), exponent);
        if (constant_tail) {
            const Eigen::Index interior = ii ? i : j;
            const Eigen::Index other = ii ? j : i;
            const Scalar x = grid.nodes[interior];
            if (other == 0) w += c * h * tail_left(x);
            if (other == grid.size() - 1) w += c * h * tail_right(x);
        }
        return w;
    }
};

template <typename Scalar>
void check_grid(const Grid1D<Scalar>& grid, const DomainSpec<Scalar>& spec) {
    const Scalar tol = Scalar(1e-12) * (spec.b - spec.a);
    const bool ok = grid.n_interior > 0 && grid.collar_per_side > 0 &&
                    grid.nodes.size() == grid.n_interior + 2 * grid.collar_per_side &&
                    std::abs(grid.h * Scalar(grid.n_interior) - (spec.b - spec.a)) <= tol &&
                    std::abs(grid.nodes[grid.first_interior()] - (spec.a + grid.h / 2)) <= tol &&
                    Scalar(grid.collar_per_side) * grid.h <= spec.collar_width + tol &&
                    Scalar(grid.collar_per_side + 1) * grid.h > spec.collar_width + tol;
    if (!ok) throw ConsistencyError("assemble_form: grid was not built for this domain");
}

}  // namespace detail

/// Assemble the discrete energy form.  Rows are independent, so `threads > 1`
/// yields a result bit-identical to serial assembly.
template <typename Scalar>
FormMatrices<Scalar> assemble_form(const Grid1D<Scalar>& grid, const DomainSpec<Scalar>& spec,
                                   const BetaField<Scalar>& beta, unsigned threads = 1) {
    spec.validate();
    beta.validate();
    detail::check_grid(grid, spec);
    if (beta.values.size() != grid.n_collar())
        throw ConsistencyError("assemble_form: beta must have one value per collar node");

    FormMatrices<Scalar> f;
    f.grid = grid;
    f.spec = spec;
    f.beta = beta;
    f.kernel_constant = normalization_constant<Scalar>(1, spec.s);

    const Eigen::Index N = grid.size();
    const Scalar h = grid.h;
    const detail::PairWeights<Scalar> weight{grid,
                                             f.kernel_constant,
                                             Scalar(-1) - Scalar(2) * spec.s,
                                             Scalar(2) * spec.s,
                                             spec.a - Scalar(grid.collar_per_side) * h,
                                             spec.b + Scalar(grid.collar_per_side) * h,
                                             spec.tail.is_constant()};

    f.stiffness.setZero(N, N);
    auto fill_rows = [&](Eigen::Index begin, Eigen::Index end) {
        for (Eigen::Index i = begin; i < end; ++i) {
            Scalar diag = 0;
            for (Eigen::Index j = 0; j < N; ++j) {
                if (j == i) continue;
                const Scalar w = weight(i, j);
                f.stiffness(i, j) = -w;
                diag += w;
            }
            if (!spec.tail.is_constant() && grid.is_interior(i)) {
                const Scalar x = grid.nodes[i];
                diag += f.kernel_constant * h * (weight.tail_left(x) + weight.tail_right(x));
            }
            f.stiffness(i, i) = diag;
        }
    };

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(N)));
    if (threads == 1) {
        fill_rows(0, N);
    } else {
        std::vector<std::thread> pool;
        const Eigen::Index chunk = (N + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const Eigen::Index begin = std::min<Eigen::Index>(N, t * chunk);
            const Eigen::Index end = std::min<Eigen::Index>(N, begin + chunk);
            pool.emplace_back(fill_rows, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    f.mass_interior = Vector<Scalar>::Constant(grid.n_interior, h);
    f.mass_mu = beta.values * h;
    f.full = f.stiffness;
    for (Eigen::Index c = 0; c < grid.n_collar(); ++c) {
        const Eigen::Index k = grid.collar_node(c);
        f.full(k, k) += f.mass_mu[c];
    }

    const auto I = grid.interior_indices();
    const auto E = grid.collar_indices();
    f.A_II = f.full(I, I);
    f.A_IE = f.full(I, E);
    f.A_EI = f.full(E, I);
    f.A_EE = f.full(E, E);
    f.A_II_llt.compute(f.A_II);
    if (f.A_II_llt.info() != Eigen::Success)
        throw SolveError("assemble_form: interior block is not positive definite");
    return f;
}

/// Collar values of the exterior datum implied by the tail mode (c for constant(c), 0 otherwise).
template <typename Scalar>
Vector<Scalar> exterior_datum(const FormMatrices<Scalar>& forms) {
    const Scalar c = forms.spec.tail.is_constant() ? Scalar(forms.spec.tail.value) : Scalar(0);
    return Vector<Scalar>::Constant(forms.n_collar(), c);
}

/// (-Delta)^s at interior nodes: (stiffness * u)_I / h.
template <typename Scalar, typename Derived>
Vector<Scalar> apply_fractional_laplacian(const FormMatrices<Scalar>& forms,
                                          const Eigen::MatrixBase<Derived>& u) {
    Grid1D<Scalar>::check_length(u.size(), forms.n_nodes(), "apply_fractional_laplacian");
    const auto I = forms.grid.interior_indices();
    return (forms.stiffness(I, Eigen::all) * u) / forms.h();
}

/// Quadrature of the nonlocal normal derivative at the collar nodes.
template <typename Scalar, typename Derived>
Vector<Scalar> nonlocal_normal_derivative(const FormMatrices<Scalar>& forms,
                                          const Eigen::MatrixBase<Derived>& u) {
    Grid1D<Scalar>::check_length(u.size(), forms.n_nodes(), "nonlocal_normal_derivative");
    const auto E = forms.grid.collar_indices();
    return (forms.stiffness(E, Eigen::all) * u) / forms.h();
}

/// Discrete Gagliardo form (C/2) sum sum (u_i-u_j)(v_i-v_j) w_ij, beta term excluded.
template <typename Scalar, typename D1, typename D2>
Scalar gagliardo_form(const FormMatrices<Scalar>& forms, const Eigen::MatrixBase<D1>& u,
                      const Eigen::MatrixBase<D2>& v) {
    Grid1D<Scalar>::check_length(u.size(), forms.n_nodes(), "gagliardo_form");
    Grid1D<Scalar>::check_length(v.size(), forms.n_nodes(), "gagliardo_form");
    return u.dot(forms.stiffness * v);
}

/// Full energy form including the exterior term sum beta u v h.
template <typename Scalar, typename D1, typename D2>
Scalar energy_form(const FormMatrices<Scalar>& forms, const Eigen::MatrixBase<D1>& u,
                   const Eigen::MatrixBase<D2>& v) {
    Grid1D<Scalar>::check_length(u.size(), forms.n_nodes(), "energy_form");
    Grid1D<Scalar>::check_length(v.size(), forms.n_nodes(), "energy_form");
    return u.dot(forms.full * v);
}

/// Robin extension of interior values: the collar values solving the
/// homogeneous discrete Robin rows  N_h u + beta u = 0.
template <typename Scalar, typename Derived>
Vector<Scalar> robin_extension(const FormMatrices<Scalar>& forms,
                               const Eigen::MatrixBase<Derived>& u_interior) {
    Grid1D<Scalar>::check_length(u_interior.size(), forms.n_interior(), "robin_extension");
    const Vector<Scalar> denom = forms.A_EE.diagonal();
    for (Eigen::Index c = 0; c < denom.size(); ++c)
        if (!(denom[c] > 0))
            throw DegeneracyError("robin_extension: vanishing denominator at collar node " +
                                  std::to_string(c));
    return (-(forms.A_EI * u_interior)).cwiseQuotient(denom);
}

/// Node vector whose collar part is the Robin extension of `u_interior`.
template <typename Scalar, typename Derived>
Vector<Scalar> robin_extended(const FormMatrices<Scalar>& forms,
                              const Eigen::MatrixBase<Derived>& u_interior) {
    return forms.grid.join(u_interior, robin_extension(forms, u_interior));
}

/// H^{-s} inner product with A_II as the Gram matrix of H_0^s:  (Ma)^T A_II^{-1} (Mb).
template <typename Scalar, typename D1, typename D2>
Scalar dual_inner(const FormMatrices<Scalar>& forms, const Eigen::MatrixBase<D1>& a,
                  const Eigen::MatrixBase<D2>& b) {
    Grid1D<Scalar>::check_length(a.size(), forms.n_interior(), "dual_inner");
    Grid1D<Scalar>::check_length(b.size(), forms.n_interior(), "dual_inner");
    const Vector<Scalar> mb = forms.mass_interior.cwiseProduct(b);
    return forms.mass_interior.cwiseProduct(a).dot(forms.A_II_llt.solve(mb));
}

template <typename Scalar, typename Derived>
Scalar dual_norm(const FormMatrices<Scalar>& forms, const Eigen::MatrixBase<Derived>& v) {
    using std::sqrt;
    return sqrt(std::max(Scalar(0), dual_inner(forms, v, v)));
}

/// sqrt(w^T A_II w), the discrete H_0^s norm.
template <typename Scalar, typename Derived>
Scalar energy_norm(const FormMatrices<Scalar>& forms, const Eigen::MatrixBase<Derived>& w) {
    Grid1D<Scalar>::check_length(w.size(), forms.n_interior(), "energy_norm");
    using std::sqrt;
    return sqrt(std::max(Scalar(0), w.dot(forms.A_II * w)));
}

/// Lumped L^2(Omega) norm.
template <typename Scalar, typename Derived>
Scalar l2_norm(const FormMatrices<Scalar>& forms, const Eigen::MatrixBase<Derived>& v) {
    Grid1D<Scalar>::check_length(v.size(), forms.n_interior(), "l2_norm");
    using std::sqrt;
    return sqrt(v.cwiseAbs2().dot(forms.mass_interior));
}

}  // namespace fraclab
