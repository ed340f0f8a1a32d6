#include "attribroi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>

#include "attribroi/errors.hpp"
#include "attribroi/rng.hpp"

namespace attribroi {

void validate_synth(const SynthSpec& spec) {
    if (spec.image_size == 0) throw ConfigError("synth: image_size must be positive");
    if (spec.n_rois < 2) throw ConfigError("synth: n_rois must be >= 2");
    if (spec.n_rois > spec.image_size * spec.image_size) {
        throw ConfigError("synth: n_rois exceeds pixel count");
    }
    if (spec.n_rois > 65535) throw ConfigError("synth: n_rois exceeds label range");
    if (spec.effect_size < 0.0) throw ConfigError("synth: effect_size must be >= 0");
    if (spec.noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
    if (spec.n_per_class == 0) throw ConfigError("synth: n_per_class must be positive");
    for (std::uint16_t id : spec.signal_rois) {
        if (id == 0 || id > spec.n_rois) {
            throw ConfigError("synth: signal ROI " + std::to_string(id) +
                              " outside 1.." + std::to_string(spec.n_rois));
        }
    }
}

RoiAtlas generate_atlas(std::size_t image_size, std::size_t n_rois, std::uint64_t seed,
                        bool grid_parcels) {
    if (image_size == 0) throw ConfigError("atlas: image_size must be positive");
    if (n_rois < 2) throw ConfigError("atlas: n_rois must be >= 2");
    if (n_rois > image_size * image_size) {
        throw ConfigError("atlas: n_rois exceeds pixel count");
    }
    if (n_rois > 65535) throw ConfigError("atlas: n_rois exceeds label range");

    RoiAtlas atlas;
    atlas.labels.height = image_size;
    atlas.labels.width = image_size;
    atlas.labels.labels.resize(image_size * image_size);

    if (grid_parcels) {
        // square-ish tiling, trailing cells folded into the last label
        const auto rows = static_cast<std::size_t>(
            std::ceil(std::sqrt(static_cast<double>(n_rois))));
        const std::size_t cols = (n_rois + rows - 1) / rows;
        for (std::size_t y = 0; y < image_size; ++y) {
            const std::size_t cy = y * rows / image_size;
            for (std::size_t x = 0; x < image_size; ++x) {
                const std::size_t cx = x * cols / image_size;
                const std::size_t cell = std::min(cy * cols + cx + 1, n_rois);
                atlas.labels.labels[y * image_size + x] =
                    static_cast<std::uint16_t>(cell);
            }
        }
    } else {
        std::mt19937_64 rng(mix_seed(seed));
        std::uniform_int_distribution<std::size_t> coord(0, image_size - 1);
        std::vector<std::pair<std::size_t, std::size_t>> sites;
        std::set<std::pair<std::size_t, std::size_t>> used;
        while (sites.size() < n_rois) {
            const std::pair<std::size_t, std::size_t> p{coord(rng), coord(rng)};
            if (used.insert(p).second) sites.push_back(p);
        }
        for (std::size_t y = 0; y < image_size; ++y) {
            for (std::size_t x = 0; x < image_size; ++x) {
                std::size_t best = 0;
                std::size_t best_d2 = static_cast<std::size_t>(-1);
                for (std::size_t i = 0; i < sites.size(); ++i) {
                    const std::size_t dy = y > sites[i].first ? y - sites[i].first
                                                              : sites[i].first - y;
                    const std::size_t dx = x > sites[i].second ? x - sites[i].second
                                                               : sites[i].second - x;
                    const std::size_t d2 = dy * dy + dx * dx;
                    if (d2 < best_d2) {  // tie keeps the lower id
                        best_d2 = d2;
                        best = i;
                    }
                }
                atlas.labels.labels[y * image_size + x] =
                    static_cast<std::uint16_t>(best + 1);
            }
        }
    }

    for (std::size_t i = 1; i <= n_rois; ++i) {
        const auto id = static_cast<std::uint16_t>(i);
        atlas.names[id] = "roi_" + std::to_string(i);
        atlas.brodmann[id] = {"BA_" + std::to_string(i)};
    }
    validate_atlas(atlas);
    return atlas;
}

Dataset generate_dataset(const SynthSpec& spec, const RoiAtlas& atlas) {
    validate_synth(spec);
    if (atlas.labels.height != spec.image_size || atlas.labels.width != spec.image_size) {
        throw ShapeError("synth: atlas " + std::to_string(atlas.labels.height) + "x" +
                         std::to_string(atlas.labels.width) + " vs image_size " +
                         std::to_string(spec.image_size));
    }
    for (std::uint16_t id : spec.signal_rois) {
        if (atlas.names.count(id) == 0) {
            throw ConfigError("synth: signal ROI " + std::to_string(id) +
                              " not in atlas");
        }
    }
    const std::set<std::uint16_t> signal(spec.signal_rois.begin(),
                                         spec.signal_rois.end());
    const std::size_t n_px = spec.image_size * spec.image_size;

    Dataset data;
    for (int label = 0; label <= 1; ++label) {
        for (std::size_t j = 0; j < spec.n_per_class; ++j) {
            std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(label),
                                            static_cast<std::uint64_t>(j)));
            std::normal_distribution<double> noise(0.0, spec.noise_sigma);
            std::vector<double> px(n_px);
            for (std::size_t i = 0; i < n_px; ++i) {
                double v = 0.5;
                if (spec.noise_sigma > 0.0) v += noise(rng);
                if (label == 1 && signal.count(atlas.labels.labels[i]) != 0) {
                    v += spec.effect_size;
                }
                px[i] = std::clamp(v, 0.0, 1.0);
            }
            Sample s;
            s.image = Tensor::from_data({spec.image_size, spec.image_size},
                                        std::move(px));
            s.label = label;
            char id[32];
            std::snprintf(id, sizeof(id), "%s%04zu", label ? "pos" : "neg", j);
            s.subject_id = id;
            data.samples.push_back(std::move(s));
        }
    }
    return data;
}

}  // namespace attribroi
