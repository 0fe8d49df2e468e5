#pragma once

#include <string>
#include <vector>

#include "device.hpp"

namespace jlfet {

enum class CurveKind { transfer, output };

struct IVPoint {
    double sweep_V = 0;
    double I_d_A = 0;
    bool converged = false;
};

// One swept terminal, the others fixed. Non-converged points stay in the
// list, flagged; extraction skips them.
struct IVCurve {
    CurveKind kind = CurveKind::transfer;
    BiasPoint fixed_bias;
    std::vector<IVPoint> points;
    std::string spec_fingerprint;

    int converged_count() const {
        int c = 0;
        for (const auto& p : points) c += p.converged ? 1 : 0;
        return c;
    }
};

}  // namespace jlfet
