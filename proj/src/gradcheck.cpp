#include "sadepth/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace sadepth {

GradCheckResult gradcheck_subset(const std::function<Var()>& f, const std::vector<Var>& inputs,
                                 const std::vector<std::vector<int64_t>>& probe, double eps) {
    for (const Var& v : inputs) {
        if (!v.requires_grad()) throw std::invalid_argument("gradcheck: input does not require grad");
        v.grad().fill(0.0);
    }
    Var y = f();
    if (y.numel() != 1) throw std::invalid_argument("gradcheck: objective must be scalar");
    y.backward();

    std::vector<Tensor> analytic;
    analytic.reserve(inputs.size());
    for (const Var& v : inputs) analytic.push_back(v.grad());

    GradCheckResult res;
    for (size_t vi = 0; vi < inputs.size(); ++vi) {
        const Var& v = inputs[vi];
        std::vector<int64_t> indices;
        if (vi < probe.size()) {
            indices = probe[vi]; // explicit subset; empty list skips the input
        } else {
            indices.resize(static_cast<size_t>(v.numel()));
            for (int64_t i = 0; i < v.numel(); ++i) indices[static_cast<size_t>(i)] = i;
        }
        for (int64_t idx : indices) {
            double& slot = v.value_mut()[idx];
            const double saved = slot;
            slot = saved + eps;
            const double up = f().value().item();
            slot = saved - eps;
            const double dn = f().value().item();
            slot = saved;
            const double numeric = (up - dn) / (2.0 * eps);
            const double a = analytic[vi][idx];
            const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1.0});
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.checked;
        }
    }
    return res;
}

GradCheckResult gradcheck(const std::function<Var()>& f, const std::vector<Var>& inputs, double eps) {
    return gradcheck_subset(f, inputs, {}, eps);
}

} // namespace sadepth
