#include "attribroi/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "attribroi/errors.hpp"

namespace attribroi {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double step) {
    if (step <= 0.0) throw ContractError("grad_check: step must be positive");

    auto& record = ComputationRecord::active();
    record.clear();
    Tensor x = Tensor::from_data(point.shape(), {point.data().begin(), point.data().end()}, true);
    Tensor y = f(x);
    std::vector<double> auto_grad(x.size(), 0.0);
    if (y.requires_grad()) {
        // A constant f yields an output detached from x; its gradient is zero.
        y.backward();
        std::copy(x.grad().begin(), x.grad().end(), auto_grad.begin());
    }
    record.clear();

    NoGradGuard no_grad;
    std::vector<double> values(point.data().begin(), point.data().end());
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + step;
        const double up = f(Tensor::from_data(point.shape(), values, false)).value();
        values[i] = saved - step;
        const double down = f(Tensor::from_data(point.shape(), values, false)).value();
        values[i] = saved;
        const double central = (up - down) / (2.0 * step);
        const double err = std::abs(auto_grad[i] - central) / std::max(1.0, std::abs(central));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace attribroi
