#pragma once

#include <string_view>
#include <vector>

#include "fraclab/nonlocal_core.hpp"

namespace fraclab {

using Vec = Vector<double>;
using Mat = Matrix<double>;
using Forms = FormMatrices<double>;

/// Which exterior condition carries the control.
enum class Variant { robin, dirichlet };

constexpr std::string_view to_string(Variant v) {
    return v == Variant::robin ? "robin" : "dirichlet";
}

/// Collar quadrature weights of the control norm: beta*h (Robin, L^2(mu)) or h (Dirichlet, L^2(dx)).
Vec control_weights(Variant variant, const Forms& forms);

/// Collar nodes that carry a control unknown.  Robin drops nodes with beta = 0.
std::vector<bool> control_mask(Variant variant, const Forms& forms);

}  // namespace fraclab
