#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "hierlog/tensor.hpp"

namespace hierlog {

// Central finite-difference check. `forward` must rebuild the graph from the
// current input data on every call and return a scalar loss. Returns the worst
// relative error over every element of every input.
inline double grad_check(const std::function<TensorPtr(Tape&)>& forward,
                         const std::vector<TensorPtr>& inputs, double eps = 1e-5) {
    Tape tape;
    for (const auto& in : inputs) in->zero_grad();
    auto loss = forward(tape);
    tape.backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& in : inputs) {
        in->ensure_grad();
        analytic.push_back(in->grad);
    }

    auto eval = [&forward]() {
        Tape t;
        auto l = forward(t);
        t.clear();
        return l->data[0];
    };

    double worst = 0.0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        auto& in = *inputs[k];
        for (size_t i = 0; i < in.size(); ++i) {
            const double saved = in.data[i];
            in.data[i] = saved + eps;
            const double up = eval();
            in.data[i] = saved - eps;
            const double down = eval();
            in.data[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[k][i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-4});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace hierlog
