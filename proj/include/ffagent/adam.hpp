#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ffagent/matrix.hpp"

namespace ffagent::nn {

// Adam with bias correction. Moments are allocated on first step and keyed
// by registration order, so the caller must pass the same parameter list
// every time.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t t = 0;
    std::vector<Vec> m, v;

    explicit Adam(double learning_rate = 1e-3) : lr(learning_rate) {}

    void step(const std::vector<ParamRef>& params) {
        if (m.empty()) {
            for (const auto& p : params) {
                m.emplace_back(p.size(), 0.0);
                v.emplace_back(p.size(), 0.0);
            }
        }
        if (m.size() != params.size()) throw ConfigError("adam: parameter list changed");
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t k = 0; k < params.size(); ++k) {
            const ParamRef& p = params[k];
            if (m[k].size() != p.size()) throw ConfigError("adam: shape mismatch");
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double g = p.grad[i];
                m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * g;
                v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * g * g;
                const double mhat = m[k][i] / bc1;
                const double vhat = v[k][i] / bc2;
                p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

inline double global_grad_norm(const std::vector<ParamRef>& params) {
    double s = 0.0;
    for (const auto& p : params)
        for (std::size_t i = 0; i < p.size(); ++i) s += p.grad[i] * p.grad[i];
    return std::sqrt(s);
}

inline void clip_grad_norm(const std::vector<ParamRef>& params, double max_norm) {
    const double n = global_grad_norm(params);
    if (n <= max_norm || n == 0.0) return;
    const double scale = max_norm / n;
    for (const auto& p : params)
        for (std::size_t i = 0; i < p.size(); ++i) p.grad[i] *= scale;
}

inline void zero_grads(const std::vector<ParamRef>& params) {
    for (const auto& p : params)
        for (std::size_t i = 0; i < p.size(); ++i) p.grad[i] = 0.0;
}

}  // namespace ffagent::nn
