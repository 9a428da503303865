#pragma once

#include "fraclab/errors.hpp"

namespace fraclab {

// Parameters of the generator: scaling exponent alpha, spatial dimension d,
// and the zeroth-order damping lambda. The solver theory targets
// 1 < alpha < 2, d >= 2, lambda > 0; the wider range (0,2] x {d>=1} x {>=0}
// is admitted so that the alpha=1 (Cauchy) and alpha=2 (Gaussian) closed
// forms remain available as oracles.
struct StableParams {
    double alpha = 1.5;
    int d = 2;
    double lambda = 0.0;

    StableParams() = default;
    StableParams(double alpha_, int d_, double lambda_ = 0.0) : alpha(alpha_), d(d_), lambda(lambda_) {
        validate();
    }

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 2.0)) throw ConfigError("StableParams: alpha must lie in (0,2]");
        if (d < 1) throw ConfigError("StableParams: d must be >= 1");
        if (lambda < 0.0) throw ConfigError("StableParams: lambda must be >= 0");
    }

    // True when (alpha, d, lambda) sits inside the regime the solver theory
    // is stated for.
    bool in_core_regime() const { return alpha > 1.0 && alpha < 2.0 && d >= 2 && lambda > 0.0; }
};

} // namespace fraclab
