#pragma once

// Central finite-difference oracle for the autodiff engine. Clears and reuses
// the calling thread's computation record, so don't interleave with a live
// recording.

#include <functional>

#include "attribroi/tensor.hpp"

namespace attribroi {

// Max over coordinates of |autodiff - central difference| / max(1, |central|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double step = 1e-6);

}  // namespace attribroi
