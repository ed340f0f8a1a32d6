#pragma once

// Seed-deterministic training augmentation: centre crop, 3x3 unsharp-mask
// sharpen, per-channel colour jitter (brightness for 1-channel inputs), and
// randomized contrast. Output is clipped to [0, 1].

#include <cstdint>

#include "attribroi/tensor.hpp"

namespace attribroi {

struct AugmentConfig {
    bool centre_crop = false;
    std::size_t crop_size = 0;  // required when centre_crop is set
    bool sharpen = false;
    bool colour_variation = false;
    bool contrast = false;
};

// image: [c,H,W]. All switches off -> identity.
Tensor augment(const Tensor& image, const AugmentConfig& config, std::uint64_t seed);

}  // namespace attribroi
