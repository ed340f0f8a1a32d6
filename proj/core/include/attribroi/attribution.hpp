#pragma once

#include <string>

#include "attribroi/tensor.hpp"

namespace attribroi {

// One method's explanation of one image.
struct AttributionMap {
    Tensor values;  // [H,W]; unsigned maps hold only values >= 0
    bool signed_values = false;
    std::string method;
    int target_class = 0;
};

}  // namespace attribroi
