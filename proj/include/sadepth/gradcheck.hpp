#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sadepth/autodiff.hpp"

namespace sadepth {

struct GradCheckResult {
    double max_rel_err = 0.0;
    int64_t checked = 0;
};

/// Central finite differences against the analytic gradient.
///
/// `f` rebuilds the scalar objective from scratch on each call, reading the
/// current values of `inputs` (perturbations are applied in place). The
/// relative error per element is |a - n| / max(|a|, |n|, 1).
GradCheckResult gradcheck(const std::function<Var()>& f, const std::vector<Var>& inputs, double eps = 1e-4);

/// Probe only the given flat indices per input (empty list = all elements).
GradCheckResult gradcheck_subset(const std::function<Var()>& f, const std::vector<Var>& inputs,
                                 const std::vector<std::vector<int64_t>>& probe, double eps = 1e-4);

} // namespace sadepth
