#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dccgcn/tensor.hpp"

namespace dccgcn::testing {

/// Largest scale-aware mismatch between the analytic gradient of
/// loss_fn and central finite differences, across every entry of every
/// parameter. loss_fn must be a pure function of the parameter values.
inline double max_gradient_error(const std::function<double()>& loss_fn,
                                 const std::function<dccgcn::Tensor(dccgcn::Tape&)>& taped_loss,
                                 std::vector<dccgcn::Tensor> params,
                                 double h = 1e-5) {
    for (auto& p : params) {
        p.ensure_grad();
        p.zero_grad();
    }
    dccgcn::Tape tape;
    dccgcn::Tensor loss = taped_loss(tape);
    tape.backward(loss);

    double worst = 0.0;
    for (auto& p : params) {
        const std::vector<double> analytic = p.grad();
        for (std::size_t i = 0; i < p.values().size(); ++i) {
            const double saved = p.values()[i];
            p.values()[i] = saved + h;
            const double up = loss_fn();
            p.values()[i] = saved - h;
            const double down = loss_fn();
            p.values()[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double err = std::abs(analytic[i] - fd) /
                               std::max({1.0, std::abs(analytic[i]), std::abs(fd)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace dccgcn::testing
