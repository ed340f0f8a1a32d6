#include "attribroi/xai.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "attribroi/dataset.hpp"
#include "attribroi/errors.hpp"
#include "attribroi/image.hpp"
#include "attribroi/ops.hpp"
#include "attribroi/rng.hpp"
#include "attribroi/serialize.hpp"
#include "attribroi/threading.hpp"

namespace attribroi {

namespace {

void check_class(const Model& model, int target_class) {
    if (target_class < 0 ||
        static_cast<std::size_t>(target_class) >= model.config.num_classes) {
        throw IndexError("target class " + std::to_string(target_class) +
                         " outside 0.." +
                         std::to_string(model.config.num_classes - 1));
    }
}

// scalar handle on one logit, for the backward sweep
Tensor pick_logit(const Tensor& logits, int target_class) {
    const Tensor picked =
        ops::gather(logits, {static_cast<std::size_t>(target_class)}, {1});
    return ops::sum(picked);
}

}  // namespace

AttributionMap saliency_map(Model& model, const Tensor& input, int target_class,
                            SaliencyReduction reduction) {
    check_class(model, target_class);
    model.set_requires_grad(false);
    ComputationRecord::active().clear();

    Tensor x = input.detach();
    x.set_requires_grad(true);
    const ForwardRecord fr = forward(model, x);
    pick_logit(fr.logits, target_class).backward();
    ComputationRecord::active().clear();

    const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    const auto g = x.grad();
    std::vector<double> values(h * w, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < h * w; ++i) {
            const double mag = std::abs(g[ch * h * w + i]);
            if (reduction == SaliencyReduction::max_abs) {
                values[i] = std::max(values[i], mag);
            } else {
                values[i] += mag / static_cast<double>(c);
            }
        }
    }

    AttributionMap map;
    map.values = Tensor::from_data({h, w}, std::move(values));
    map.signed_values = false;
    map.method = "saliency";
    map.target_class = target_class;
    return map;
}

AttributionMap grad_cam(Model& model, const Tensor& input, int target_class) {
    check_class(model, target_class);
    model.set_requires_grad(false);
    ComputationRecord::active().clear();

    Tensor x = input.detach();
    x.set_requires_grad(true);
    const ForwardRecord fr = forward(model, x, /*capture=*/true);
    pick_logit(fr.logits, target_class).backward();
    const Tensor& tokens = fr.captured_tokens();
    const Tensor grads = fr.captured_tokens_grad();
    ComputationRecord::active().clear();

    const std::size_t h = tokens.shape()[0], w = tokens.shape()[1],
                      d = tokens.shape()[2];
    std::vector<double> weight(d, 0.0);
    for (std::size_t i = 0; i < h * w; ++i) {
        for (std::size_t k = 0; k < d; ++k) weight[k] += grads.data()[i * d + k];
    }
    for (double& v : weight) v /= static_cast<double>(h * w);

    std::vector<double> cam(h * w, 0.0);
    for (std::size_t i = 0; i < h * w; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += weight[k] * tokens.data()[i * d + k];
        cam[i] = std::max(0.0, s);
    }

    Tensor map_hw;
    {
        NoGradGuard guard;
        map_hw = ops::upsample_bilinear(Tensor::from_data({h, w}, std::move(cam)),
                                        model.config.image_size,
                                        model.config.image_size);
    }
    double peak = 0.0;
    for (double v : map_hw.data()) peak = std::max(peak, v);
    if (peak > 0.0) {
        for (double& v : map_hw.data()) v /= peak;
    }

    AttributionMap map;
    map.values = map_hw;
    map.signed_values = false;
    map.method = "gradcam";
    map.target_class = target_class;
    return map;
}

ShapleyResult shapley_exact(std::size_t n, const CoalitionValue& value) {
    if (n == 0) throw ContractError("shapley: no players");
    if (n > 20) throw ConfigError("shapley exact: " + std::to_string(n) + " players > 20");

    const std::size_t masks = std::size_t{1} << n;
    std::vector<double> v(masks);
    parallel_for(masks, [&](std::size_t mask) {
        std::vector<bool> coalition(n);
        for (std::size_t i = 0; i < n; ++i) coalition[i] = (mask >> i) & 1;
        v[mask] = value(coalition);
    });

    // weight by coalition size: s!(n-1-s)!/n! = 1/(n*C(n-1,s))
    std::vector<double> choose(n, 1.0);
    for (std::size_t s = 1; s < n; ++s) {
        choose[s] = choose[s - 1] * static_cast<double>(n - s) / static_cast<double>(s);
    }
    std::vector<double> weight(n);
    for (std::size_t s = 0; s < n; ++s) {
        weight[s] = 1.0 / (static_cast<double>(n) * choose[s]);
    }

    ShapleyResult result;
    result.phi.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t bit = std::size_t{1} << i;
        for (std::size_t mask = 0; mask < masks; ++mask) {
            if (mask & bit) continue;
            const auto s = static_cast<std::size_t>(std::popcount(mask));
            result.phi[i] += weight[s] * (v[mask | bit] - v[mask]);
        }
    }
    result.v_empty = v[0];
    result.v_full = v[masks - 1];
    return result;
}

ShapleyResult shapley_sampled(std::size_t n, const CoalitionValue& value,
                              std::size_t budget, std::uint64_t seed) {
    if (n == 0) throw ContractError("shapley: no players");
    if (budget < 2 * n) {
        throw ConfigError("shapley sampled: budget " + std::to_string(budget) +
                          " below 2n = " + std::to_string(2 * n));
    }
    const std::size_t perms = budget / n;

    const double v_empty = value(std::vector<bool>(n, false));
    const double v_full = value(std::vector<bool>(n, true));

    std::vector<std::vector<double>> marginal(perms, std::vector<double>(n, 0.0));
    const std::size_t pairs = (perms + 1) / 2;
    parallel_for(pairs, [&](std::size_t pair) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(seed, pair));
        std::shuffle(order.begin(), order.end(), rng);

        for (int half = 0; half < 2; ++half) {
            const std::size_t p = 2 * pair + static_cast<std::size_t>(half);
            if (p >= perms) break;
            std::vector<bool> coalition(n, false);
            double prev = v_empty;
            for (std::size_t step = 0; step < n; ++step) {
                const std::size_t player = order[step];
                coalition[player] = true;
                const double cur = value(coalition);
                marginal[p][player] = cur - prev;
                prev = cur;
            }
            std::reverse(order.begin(), order.end());  // antithetic partner
        }
    });

    ShapleyResult result;
    result.phi.assign(n, 0.0);
    result.std_err.assign(n, 0.0);
    for (std::size_t p = 0; p < perms; ++p) {
        for (std::size_t i = 0; i < n; ++i) result.phi[i] += marginal[p][i];
    }
    for (double& phi : result.phi) phi /= static_cast<double>(perms);
    for (std::size_t i = 0; i < n; ++i) {
        double ss = 0.0;
        for (std::size_t p = 0; p < perms; ++p) {
            const double d = marginal[p][i] - result.phi[i];
            ss += d * d;
        }
        result.std_err[i] =
            std::sqrt(ss / static_cast<double>(perms - 1) / static_cast<double>(perms));
    }
    result.v_empty = v_empty;
    result.v_full = v_full;
    return result;
}

ShapExplanation shap_values(Model& model, const Tensor& image, int target_class,
                            const RoiAtlas& atlas, const ShapleyConfig& config,
                            const std::optional<Tensor>& baseline_mean) {
    check_class(model, target_class);
    if (image.rank() != 2 || image.shape()[0] != atlas.labels.height ||
        image.shape()[1] != atlas.labels.width) {
        throw ShapeError("shap: image " + shape_str(image.shape()) + " vs atlas " +
                         std::to_string(atlas.labels.height) + "x" +
                         std::to_string(atlas.labels.width));
    }
    std::size_t uncovered = 0;
    for (std::uint16_t label : atlas.labels.labels) {
        if (label == 0) ++uncovered;
    }
    if (uncovered > 0) {
        throw ConfigError("shap: " + std::to_string(uncovered) +
                          " pixels outside every ROI");
    }

    Tensor baseline;
    if (config.baseline == ShapBaseline::dataset_mean) {
        if (!baseline_mean) {
            throw ConfigError("shap: dataset-mean baseline needs the mean image");
        }
        if (baseline_mean->shape() != image.shape()) {
            throw ShapeError("shap: baseline " + shape_str(baseline_mean->shape()) +
                             " vs image " + shape_str(image.shape()));
        }
        baseline = *baseline_mean;
    } else {
        baseline = Tensor::zeros(image.shape());
    }

    const std::vector<std::uint16_t> players = roi_ids(atlas);
    const std::size_t n = players.size();
    std::map<std::uint16_t, std::size_t> slot_of;
    for (std::size_t i = 0; i < n; ++i) slot_of[players[i]] = i;
    const std::size_t n_px = image.size();
    std::vector<std::size_t> pixel_slot(n_px);
    for (std::size_t p = 0; p < n_px; ++p) {
        auto it = slot_of.find(atlas.labels.labels[p]);
        if (it == slot_of.end()) {
            throw ContractError("shap: grid label " +
                                std::to_string(atlas.labels.labels[p]) +
                                " has no name entry");
        }
        pixel_slot[p] = it->second;
    }

    model.set_requires_grad(false);
    const auto value = [&](const std::vector<bool>& coalition) {
        NoGradGuard guard;
        std::vector<double> px(n_px);
        for (std::size_t p = 0; p < n_px; ++p) {
            px[p] = coalition[pixel_slot[p]] ? image.data()[p] : baseline.data()[p];
        }
        const Tensor input = to_model_input(
            Tensor::from_data(image.shape(), std::move(px)), model.config.channels);
        const ForwardRecord fr = forward(model, input);
        const Tensor probs = ops::softmax(fr.logits, 0);
        return probs.data()[static_cast<std::size_t>(target_class)];
    };

    const ShapleyResult solved =
        config.mode == ShapMode::exact
            ? shapley_exact(n, value)
            : shapley_sampled(n, value, config.sample_budget, config.seed);

    double total_mag = 0.0, total_phi = 0.0;
    for (double phi : solved.phi) {
        total_mag += std::abs(phi);
        total_phi += phi;
    }

    ShapExplanation out;
    out.v_empty = solved.v_empty;
    out.v_full = solved.v_full;
    out.efficiency_gap = std::abs(total_phi - (solved.v_full - solved.v_empty));

    out.table.method = "shap";
    std::vector<std::size_t> by_rank(n);
    std::iota(by_rank.begin(), by_rank.end(), std::size_t{0});
    std::sort(by_rank.begin(), by_rank.end(), [&](std::size_t a, std::size_t b) {
        const double ma = std::abs(solved.phi[a]), mb = std::abs(solved.phi[b]);
        if (ma != mb) return ma > mb;
        return players[a] < players[b];
    });
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = by_rank[r];
        RoiScore score;
        score.id = players[i];
        score.mean = solved.phi[i];
        score.share = total_mag > 0.0 ? std::abs(solved.phi[i]) / total_mag : 0.0;
        score.rank = r + 1;
        out.table.scores.push_back(score);
        if (!solved.std_err.empty()) out.std_err.push_back(solved.std_err[i]);
    }

    std::vector<double> broadcast(n_px);
    for (std::size_t p = 0; p < n_px; ++p) broadcast[p] = solved.phi[pixel_slot[p]];
    out.map.values = Tensor::from_data(image.shape(), std::move(broadcast));
    out.map.signed_values = true;
    out.map.method = "shap";
    out.map.target_class = target_class;
    return out;
}

void save_attribution(const AttributionMap& map, const std::string& stem) {
    write_tensor(stem + ".atsr", map.values);

    const nlohmann::json sidecar = {{"schema_version", 1},
                                    {"method", map.method},
                                    {"target_class", map.target_class},
                                    {"signed", map.signed_values},
                                    {"pgm_normalization", "max"}};
    atomic_write_file(stem + ".json", sidecar.dump(2) + "\n");

    // display heatmap: max-normalized magnitudes
    std::vector<double> mags(map.values.data().begin(), map.values.data().end());
    double peak = 0.0;
    for (double& v : mags) {
        v = std::abs(v);
        peak = std::max(peak, v);
    }
    if (peak > 0.0) {
        for (double& v : mags) v /= peak;
    }
    write_pgm(stem + ".pgm", Tensor::from_data(map.values.shape(), std::move(mags)));
}

AttributionMap load_attribution(const std::string& stem) {
    AttributionMap map;
    map.values = read_tensor(stem + ".atsr");
    if (map.values.rank() != 2) {
        throw ParseError(stem + ".atsr: attribution map must be rank 2, got " +
                         shape_str(map.values.shape()));
    }
    std::ifstream in(stem + ".json");
    if (!in) throw ParseError("cannot open " + stem + ".json");
    nlohmann::json sidecar;
    try {
        in >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(stem + ".json: " + e.what());
    }
    if (!sidecar.contains("method") || !sidecar.contains("target_class") ||
        !sidecar.contains("signed")) {
        throw ParseError(stem + ".json: needs method, target_class, signed");
    }
    map.method = sidecar["method"].get<std::string>();
    map.target_class = sidecar["target_class"].get<int>();
    map.signed_values = sidecar["signed"].get<bool>();
    return map;
}

}  // namespace attribroi
