#pragma once

// Binary PGM (P5) readers/writers. Grayscale images and heatmaps use
// maxval 255 with round-half-up quantization of [0,1] values; ROI label
// grids use maxval 65535 with raw integer pixels (big-endian per the
// format).

#include <cstdint>
#include <filesystem>
#include <vector>

#include "attribroi/tensor.hpp"

namespace attribroi {

struct LabelGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint16_t> labels;  // row-major ROI ids

    std::uint16_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
};

// t: rank-2, values clamped to [0,1]; pixel = round(v * 255) half-up.
void write_pgm(const std::filesystem::path& path, const Tensor& t);
// [h,w] tensor with values pixel/maxval (maxval 255 or 65535 accepted).
Tensor read_pgm(const std::filesystem::path& path);

void write_label_grid(const std::filesystem::path& path, const LabelGrid& grid);
LabelGrid read_label_grid(const std::filesystem::path& path);

}  // namespace attribroi
