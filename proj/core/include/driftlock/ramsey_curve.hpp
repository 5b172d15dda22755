#pragma once

#include <vector>

namespace driftlock {

/// Averaged Ramsey fringe: mean population vs free-evolution time, with the
/// per-point standard error and the wall-clock interval the shots spanned.
struct RamseyCurve {
    std::vector<double> t_evol_s;
    std::vector<double> signal;
    std::vector<double> std_err;
    double wall_span_s = 0.0;
};

} // namespace driftlock
