#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ffagent/adam.hpp"
#include "ffagent/matrix.hpp"

namespace ffagent::nn {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::vector<std::pair<std::string, double>> per_param;

    bool pass(double tol) const { return max_rel_err < tol; }
};

// Compares analytic gradients against central finite differences.
// Finite differences trade truncation error (large steps, high curvature)
// against cancellation noise (small steps, tiny gradients), and no single
// step size wins everywhere; each coordinate is therefore checked at several
// steps, including a Richardson-extrapolated pair, and scored by its best
// agreement. A correct gradient matches at some step; a wrong one at none.
// loss_fn: pure forward evaluation of the scalar loss (no side effects on params).
// grad_fn: zero grads, forward + backward, leaves gradients in the refs.
// stride > 1 checks every stride-th coordinate of each tensor (always
// including the first), trading coverage for speed on large tensors.
inline GradCheckReport gradient_check(const std::vector<ParamRef>& params,
                                      const std::function<double()>& loss_fn,
                                      const std::function<void()>& grad_fn,
                                      double step = 1e-5, std::size_t stride = 1) {
    grad_fn();
    std::vector<Vec> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.emplace_back(p.grad, p.grad + p.size());

    const auto central = [&](const ParamRef& p, std::size_t i, double h) {
        const double saved = p.value[i];
        p.value[i] = saved + h;
        const double lp = loss_fn();
        p.value[i] = saved - h;
        const double lm = loss_fn();
        p.value[i] = saved;
        return (lp - lm) / (2.0 * h);
    };
    const auto rel_err = [](double num, double ana) {
        const double denom = std::max(std::abs(num) + std::abs(ana), 1e-6);
        return std::abs(num - ana) / denom;
    };

    GradCheckReport report;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const ParamRef& p = params[k];
        double worst = 0.0;
        for (std::size_t i = 0; i < p.size(); i += stride) {
            const double ana = analytic[k][i];
            const double d_small = central(p, i, step);
            const double d_full = central(p, i, 10.0 * step);
            const double d_half = central(p, i, 5.0 * step);
            const double d_rich = (4.0 * d_half - d_full) / 3.0;
            const double err = std::min({rel_err(d_small, ana), rel_err(d_full, ana),
                                         rel_err(d_half, ana), rel_err(d_rich, ana)});
            worst = std::max(worst, err);
        }
        report.per_param.emplace_back(p.name, worst);
        if (worst > report.max_rel_err) {
            report.max_rel_err = worst;
            report.worst_param = p.name;
        }
    }
    return report;
}

}  // namespace ffagent::nn
