#pragma once

// The three attribution engines: input-gradient saliency, Grad-CAM on the
// captured token grid, and Shapley values over ROI coalitions.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "attribroi/atlas.hpp"
#include "attribroi/attribution.hpp"
#include "attribroi/model.hpp"

namespace attribroi {

enum class SaliencyReduction { max_abs, mean_abs };

// |d logit_target / d pixel| reduced over channels. input: [c,H,W].
// Parameter grads are turned off for the sweep (and left off).
AttributionMap saliency_map(Model& model, const Tensor& input, int target_class,
                            SaliencyReduction reduction = SaliencyReduction::max_abs);

// ReLU of the gradient-weighted channel sum on the captured token grid,
// bilinearly upsampled to the input size, max-normalized unless all zero.
AttributionMap grad_cam(Model& model, const Tensor& input, int target_class);

enum class ShapMode { exact, sampled };
enum class ShapBaseline { dataset_mean, constant_zero };

struct ShapleyConfig {
    ShapMode mode = ShapMode::exact;
    std::size_t sample_budget = 0;  // marginal evaluations; >= 2n in sampled mode
    ShapBaseline baseline = ShapBaseline::dataset_mean;
    std::uint64_t seed = 0;
};

// Game-level solvers. `value` maps a coalition membership mask to v(S).
struct ShapleyResult {
    std::vector<double> phi;
    std::vector<double> std_err;  // per player; empty in exact mode
    double v_empty = 0.0;
    double v_full = 0.0;
};

using CoalitionValue = std::function<double(const std::vector<bool>&)>;

// Full 2^n enumeration; n <= 20.
ShapleyResult shapley_exact(std::size_t n, const CoalitionValue& value);

// Seeded permutation sampling with antithetic (reversed) pairs;
// floor(budget / n) permutations. Efficiency is exact by telescoping.
ShapleyResult shapley_sampled(std::size_t n, const CoalitionValue& value,
                              std::size_t budget, std::uint64_t seed);

struct ShapExplanation {
    RoiScoreTable table;   // mean = signed phi; share/rank by magnitude
    AttributionMap map;    // signed phi broadcast over each ROI's pixels
    std::vector<double> std_err;  // aligned with the table's rank order
    double v_empty = 0.0;
    double v_full = 0.0;
    double efficiency_gap = 0.0;  // |sum(phi) - (v_full - v_empty)|
};

// Players = atlas ROIs; v(S) = softmax probability of target_class with the
// pixels of ROIs outside S replaced by the baseline image. image: [H,W];
// baseline_mean required for the dataset-mean baseline.
ShapExplanation shap_values(Model& model, const Tensor& image, int target_class,
                            const RoiAtlas& atlas, const ShapleyConfig& config,
                            const std::optional<Tensor>& baseline_mean = std::nullopt);

// ATSR tensor + JSON sidecar (method, target_class, signed) + an 8-bit PGM
// heatmap of the max-normalized magnitudes, at stem.{atsr,json,pgm}.
void save_attribution(const AttributionMap& map, const std::string& stem);
AttributionMap load_attribution(const std::string& stem);

}  // namespace attribroi
