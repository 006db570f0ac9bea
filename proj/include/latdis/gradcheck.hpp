#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace latdis {

// Loss callback for the checker: evaluates the loss at `params` and, when
// `grad` is non-null, fills it with the analytic gradient. The callback
// must be deterministic (frozen noise) for central differences to be
// meaningful.
using LossFn = std::function<double(const std::vector<double>& params,
                                    std::vector<double>* grad)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Compares the analytic gradient against central differences
// (f(p+eps) - f(p-eps)) / (2 eps) elementwise. The error is
// |a - n| / max(1, |a| + |n|), i.e. relative for large gradients and
// absolute near zero.
inline GradCheckResult grad_check(const LossFn& loss_fn, std::vector<double> params,
                                  double epsilon = 1e-5) {
    std::vector<double> analytic(params.size(), 0.0);
    loss_fn(params, &analytic);

    GradCheckResult result;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + epsilon;
        const double plus = loss_fn(params, nullptr);
        params[i] = saved - epsilon;
        const double minus = loss_fn(params, nullptr);
        params[i] = saved;

        const double numeric = (plus - minus) / (2.0 * epsilon);
        const double a = analytic[i];
        const double rel = std::abs(a - numeric) /
                           std::max(1.0, std::abs(a) + std::abs(numeric));
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_index = i;
            result.worst_analytic = a;
            result.worst_numeric = numeric;
        }
    }
    return result;
}

}  // namespace latdis
