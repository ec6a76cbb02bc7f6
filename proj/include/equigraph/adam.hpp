#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace eqg {

// ADAM with bias correction; beta1 0.9, beta2 0.999, eps 1e-8.
struct Adam {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    int t = 0;
    std::vector<double> m, v;

    explicit Adam(double learning_rate, std::size_t n)
        : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}

    void step(std::span<const double> grad, std::span<double> params) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, t);
        const double c2 = 1.0 - std::pow(beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
};

} // namespace eqg
