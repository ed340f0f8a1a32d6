#include "attribroi/augment.hpp"

#include <algorithm>
#include <random>

#include "attribroi/errors.hpp"
#include "attribroi/rng.hpp"

namespace attribroi {

Tensor augment(const Tensor& image, const AugmentConfig& config, std::uint64_t seed) {
    if (image.rank() != 3) {
        throw ShapeError("augment: [c,H,W] image required, got " + shape_str(image.shape()));
    }
    const std::size_t c = image.shape()[0];
    std::size_t h = image.shape()[1], w = image.shape()[2];
    std::vector<double> px(image.data().begin(), image.data().end());

    if (config.centre_crop) {
        const std::size_t side = config.crop_size;
        if (side == 0 || side > h || side > w) {
            throw ShapeError("augment: crop " + std::to_string(side) + " exceeds image " +
                             std::to_string(h) + "x" + std::to_string(w));
        }
        const std::size_t oy = (h - side) / 2, ox = (w - side) / 2;
        std::vector<double> cropped(c * side * side);
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t y = 0; y < side; ++y) {
                for (std::size_t x = 0; x < side; ++x) {
                    cropped[(ch * side + y) * side + x] =
                        px[(ch * h + oy + y) * w + ox + x];
                }
            }
        }
        px = std::move(cropped);
        h = w = side;
    }

    if (config.sharpen) {
        // identity + Laplacian high-pass: centre 5, cross -1, corners 0;
        // borders clamped
        std::vector<double> sharp(px.size());
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* src = px.data() + ch * h * w;
            double* dst = sharp.data() + ch * h * w;
            for (std::size_t y = 0; y < h; ++y) {
                const std::size_t up = y == 0 ? 0 : y - 1;
                const std::size_t down = y + 1 == h ? y : y + 1;
                for (std::size_t x = 0; x < w; ++x) {
                    const std::size_t left = x == 0 ? 0 : x - 1;
                    const std::size_t right = x + 1 == w ? x : x + 1;
                    dst[y * w + x] = 5.0 * src[y * w + x] - src[up * w + x] -
                                     src[down * w + x] - src[y * w + left] -
                                     src[y * w + right];
                }
            }
        }
        px = std::move(sharp);
    }

    std::mt19937_64 rng(mix_seed(seed));
    if (config.colour_variation) {
        std::uniform_real_distribution<double> jitter(0.9, 1.1);
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double f = jitter(rng);
            for (std::size_t i = 0; i < h * w; ++i) px[ch * h * w + i] *= f;
        }
    }
    if (config.contrast) {
        std::uniform_real_distribution<double> spread(0.8, 1.2);
        const double factor = spread(rng);
        for (std::size_t ch = 0; ch < c; ++ch) {
            double mean = 0.0;
            for (std::size_t i = 0; i < h * w; ++i) mean += px[ch * h * w + i];
            mean /= static_cast<double>(h * w);
            for (std::size_t i = 0; i < h * w; ++i) {
                double& v = px[ch * h * w + i];
                v = factor * (v - mean) + mean;
            }
        }
    }

    const bool touched =
        config.centre_crop || config.sharpen || config.colour_variation || config.contrast;
    if (touched) {
        for (double& v : px) v = std::clamp(v, 0.0, 1.0);
    }
    return Tensor::from_data({c, h, w}, std::move(px));
}

}  // namespace attribroi
