#pragma once

#include <cmath>

namespace jlfet {

// B(t) = t / (e^t - 1), the exponential-fitting weight of the
// Scharfetter-Gummel flux. Branches:
//   |t| < 1e-4 : series 1 - t/2 + t^2/12 (avoids 0/0; error < 1e-18)
//   t  >  705  : t*e^-t (e^t alone would overflow; relative error < 1e-300)
//   otherwise  : t / expm1(t), safe on both signs (expm1(-large) -> -1)
inline double bernoulli(double t) {
    const double a = std::abs(t);
    if (a < 1e-4) return 1.0 - t / 2.0 + t * t / 12.0;
    if (t > 705.0) return t * std::exp(-t);
    return t / std::expm1(t);
}

}  // namespace jlfet
