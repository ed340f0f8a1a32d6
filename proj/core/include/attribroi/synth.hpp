#pragma once

#include <cstdint>
#include <vector>

#include "attribroi/atlas.hpp"
#include "attribroi/dataset.hpp"

namespace attribroi {

// Planted-signal generator spec. effect_size = 0 builds the null dataset
// (classes identically distributed).
struct SynthSpec {
    std::size_t image_size = 64;
    std::size_t n_rois = 16;
    std::vector<std::uint16_t> signal_rois;
    double effect_size = 0.3;
    double noise_sigma = 0.1;
    std::size_t n_per_class = 100;
    std::uint64_t seed = 0;
    bool grid_parcels = false;  // axis-aligned grid instead of Voronoi
};

void validate_synth(const SynthSpec& spec);

// Seeded Voronoi parcellation; every pixel labelled 1..n_rois, names "roi_i",
// BA tags "BA_i". Grid mode tiles square-ish cells instead.
RoiAtlas generate_atlas(std::size_t image_size, std::size_t n_rois, std::uint64_t seed,
                        bool grid_parcels = false);

// Balanced two-class set: negatives = N(0.5, sigma) per pixel, positives
// additionally shifted by effect_size inside the signal ROIs; clipped to [0,1].
Dataset generate_dataset(const SynthSpec& spec, const RoiAtlas& atlas);

}  // namespace attribroi
