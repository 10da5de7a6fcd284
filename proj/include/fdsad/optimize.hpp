#pragma once

#include "fdsad/spectral_models.hpp"

#include <functional>

namespace fdsad {

struct SimplexResult {
    Vector x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

struct SimplexOptions {
    double initial_step = 0.05;
    double ftol = 1e-12;  ///< relative spread of simplex values
    double xtol = 1e-10;  ///< simplex diameter
    int max_evaluations = 4000;
};

/// Nelder-Mead with the standard coefficients (1, 2, 0.5, 0.5). Non-finite
/// objective values are treated as +inf, so constraints can be imposed by
/// returning infinity.
[[nodiscard]] SimplexResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                                        const SimplexOptions& opts = {});

}  // namespace fdsad
