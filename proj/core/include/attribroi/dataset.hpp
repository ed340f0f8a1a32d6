#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attribroi/tensor.hpp"

namespace attribroi {

struct Sample {
    Tensor image;  // [H,W] in [0,1]
    int label = 0;
    std::string subject_id;
};

struct Dataset {
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

// Reads index.json + the PGM files it points to.
Dataset load_dataset(const std::string& dir);

void save_dataset(const Dataset& data, const std::string& dir);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

// Seeded shuffle, last `val_fraction` goes to validation. val_fraction in [0,1).
SplitIndices train_val_split(std::size_t n, double val_fraction, std::uint64_t seed);

// Per-pixel mean over all samples, [H,W].
Tensor mean_image(const Dataset& data);

// Replicates a [H,W] image across `channels` to a [c,H,W] model input.
Tensor to_model_input(const Tensor& image, std::size_t channels);

}  // namespace attribroi
