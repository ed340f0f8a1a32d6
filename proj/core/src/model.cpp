#include "attribroi/model.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "attribroi/errors.hpp"
#include "attribroi/ops.hpp"
#include "attribroi/rng.hpp"
#include "attribroi/serialize.hpp"
#include "json.hpp"

namespace attribroi {

namespace {

std::size_t grid_side(const ModelConfig& c, std::size_t stage) {
    return (c.image_size / c.patch_size) >> stage;
}

std::string stage_block(std::size_t s, std::size_t b) {
    return "s" + std::to_string(s) + ".b" + std::to_string(b) + ".";
}

// Every named parameter with its shape, in creation order. Initialization,
// counting, and checkpointing all derive from this single walk.
void walk_params(const ModelConfig& c,
                 const std::function<void(const std::string&, const Shape&, bool)>& fn) {
    // fn(name, shape, is_weight): weights get truncated-normal init, the rest
    // (biases, LN betas) zeros; LN gammas are flagged by name.
    const std::size_t pp = c.channels * c.patch_size * c.patch_size;
    fn("patch_embed.weight", {pp, c.stage_embed_dims[0]}, true);
    fn("patch_embed.bias", {c.stage_embed_dims[0]}, false);
    for (std::size_t s = 0; s < c.stage_embed_dims.size(); ++s) {
        const std::size_t d = c.stage_embed_dims[s];
        const std::size_t dk = d / c.heads_per_stage[s];
        for (std::size_t b = 0; b < c.stage_depths[s]; ++b) {
            const std::string p = stage_block(s, b);
            fn(p + "ln1.gamma", {d}, false);
            fn(p + "ln1.beta", {d}, false);
            for (std::size_t h = 0; h < c.heads_per_stage[s]; ++h) {
                const std::string hp = p + "attn.h" + std::to_string(h) + ".";
                fn(hp + "wq", {d, dk}, true);
                fn(hp + "bq", {dk}, false);
                fn(hp + "wk", {d, dk}, true);
                fn(hp + "bk", {dk}, false);
                fn(hp + "wv", {d, dk}, true);
                fn(hp + "bv", {dk}, false);
            }
            fn(p + "attn.proj.weight", {d, d}, true);
            fn(p + "attn.proj.bias", {d}, false);
            fn(p + "ln2.gamma", {d}, false);
            fn(p + "ln2.beta", {d}, false);
            fn(p + "mlp.fc1.weight", {d, c.mlp_ratio * d}, true);
            fn(p + "mlp.fc1.bias", {c.mlp_ratio * d}, false);
            fn(p + "mlp.fc2.weight", {c.mlp_ratio * d, d}, true);
            fn(p + "mlp.fc2.bias", {d}, false);
        }
        if (s + 1 < c.stage_embed_dims.size()) {
            fn("merge" + std::to_string(s) + ".weight", {4 * d, c.stage_embed_dims[s + 1]}, true);
            fn("merge" + std::to_string(s) + ".bias", {c.stage_embed_dims[s + 1]}, false);
        }
    }
    const std::size_t dl = c.stage_embed_dims.back();
    fn("head.ln.gamma", {dl}, false);
    fn("head.ln.beta", {dl}, false);
    fn("head.weight", {dl, c.num_classes}, true);
    fn("head.bias", {c.num_classes}, false);
}

bool is_gamma(const std::string& name) {
    return name.size() >= 5 && name.compare(name.size() - 5, 5, "gamma") == 0;
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return nlohmann::json{{"image_size", c.image_size},
                          {"channels", c.channels},
                          {"patch_size", c.patch_size},
                          {"stage_embed_dims", c.stage_embed_dims},
                          {"stage_depths", c.stage_depths},
                          {"heads_per_stage", c.heads_per_stage},
                          {"mlp_ratio", c.mlp_ratio},
                          {"num_classes", c.num_classes},
                          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.image_size = j.at("image_size").get<std::size_t>();
        c.channels = j.at("channels").get<std::size_t>();
        c.patch_size = j.at("patch_size").get<std::size_t>();
        c.stage_embed_dims = j.at("stage_embed_dims").get<std::vector<std::size_t>>();
        c.stage_depths = j.at("stage_depths").get<std::vector<std::size_t>>();
        c.heads_per_stage = j.at("heads_per_stage").get<std::vector<std::size_t>>();
        c.mlp_ratio = j.at("mlp_ratio").get<std::size_t>();
        c.num_classes = j.at("num_classes").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model config: ") + e.what());
    }
    return c;
}

}  // namespace

void validate_config(const ModelConfig& c) {
    auto bad = [](const std::string& field, const std::string& why) -> ConfigError {
        return ConfigError("model config field '" + field + "': " + why);
    };
    const std::size_t stages = c.stage_embed_dims.size();
    if (stages == 0) throw bad("stage_embed_dims", "at least one stage required");
    if (c.stage_depths.size() != stages || c.heads_per_stage.size() != stages) {
        throw bad("stage_depths/heads_per_stage",
                  "must match stage_embed_dims length " + std::to_string(stages));
    }
    if (c.channels == 0) throw bad("channels", "must be positive");
    if (c.patch_size == 0 || c.image_size == 0 || c.image_size % c.patch_size != 0) {
        throw bad("patch_size", "image_size " + std::to_string(c.image_size) +
                                    " not divisible by patch_size " +
                                    std::to_string(c.patch_size));
    }
    if (c.mlp_ratio == 0) throw bad("mlp_ratio", "must be positive");
    if (c.num_classes < 2) throw bad("num_classes", "at least two classes required");
    std::size_t side = c.image_size / c.patch_size;
    for (std::size_t s = 0; s < stages; ++s) {
        if (c.stage_depths[s] == 0) throw bad("stage_depths", "zero depth in stage " + std::to_string(s));
        if (c.heads_per_stage[s] == 0 || c.stage_embed_dims[s] % c.heads_per_stage[s] != 0) {
            throw bad("heads_per_stage", "stage " + std::to_string(s) + " dim " +
                                             std::to_string(c.stage_embed_dims[s]) +
                                             " not divisible by head count");
        }
        if (s + 1 < stages) {
            if (side % 2 != 0) {
                throw bad("stage_embed_dims", "token grid side " + std::to_string(side) +
                                                  " at merge " + std::to_string(s) +
                                                  " is not even");
            }
            side /= 2;
        }
    }
}

std::size_t param_count(const ModelConfig& c) {
    validate_config(c);
    std::size_t total = 0;
    walk_params(c, [&](const std::string&, const Shape& shape, bool) {
        total += shape_numel(shape);
    });
    return total;
}

Tensor& Model::param(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
}

const Tensor& Model::param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
}

void Model::set_requires_grad(bool rg) {
    for (auto& [name, t] : params) t.set_requires_grad(rg);
}

void Model::zero_grad() {
    for (auto& [name, t] : params) {
        if (t.requires_grad()) t.zero_grad();
    }
}

Model init_model(const ModelConfig& config) {
    validate_config(config);
    Model model;
    model.config = config;
    std::mt19937_64 rng(mix_seed(config.seed));
    walk_params(config, [&](const std::string& name, const Shape& shape, bool is_weight) {
        std::vector<double> v(shape_numel(shape), 0.0);
        if (is_weight) {
            for (double& x : v) x = truncated_normal(rng, 0.02);
        } else if (is_gamma(name)) {
            std::fill(v.begin(), v.end(), 1.0);
        }
        model.params.emplace(name, Tensor::from_data(shape, std::move(v)));
    });
    return model;
}

const Tensor& ForwardRecord::captured_tokens() const {
    if (!captured) throw ContractError("forward ran without capture enabled");
    return *captured;
}

Tensor ForwardRecord::captured_tokens_grad() const {
    const Tensor& t = captured_tokens();
    if (!t.requires_grad()) {
        throw ContractError("captured tokens carry no gradient (no recorded path)");
    }
    return Tensor::from_data(t.shape(), {t.grad().begin(), t.grad().end()});
}

Tensor patch_merge(const Tensor& tokens, const Tensor& weight, const Tensor& bias) {
    if (tokens.rank() != 3) {
        throw ShapeError("patch_merge: rank-3 [h,w,d] tokens required, got " +
                         shape_str(tokens.shape()));
    }
    const std::size_t h = tokens.shape()[0], w = tokens.shape()[1], d = tokens.shape()[2];
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("patch_merge: odd token grid " + shape_str(tokens.shape()));
    }
    if (weight.rank() != 2 || weight.shape()[0] != 4 * d) {
        throw ShapeError("patch_merge: weight " + shape_str(weight.shape()) +
                         " does not accept concatenated dim " + std::to_string(4 * d));
    }
    const std::size_t oh = h / 2, ow = w / 2;
    std::vector<std::size_t> idx;
    idx.reserve(oh * ow * 4 * d);
    for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
            for (std::size_t q = 0; q < 4; ++q) {
                const std::size_t y = 2 * i + q / 2, x = 2 * j + q % 2;
                for (std::size_t f = 0; f < d; ++f) idx.push_back((y * w + x) * d + f);
            }
        }
    }
    Tensor merged = ops::gather(tokens, std::move(idx), {oh * ow, 4 * d});
    Tensor projected = ops::add_bias(ops::matmul(merged, weight), bias);
    return ops::reshape(projected, {oh, ow, weight.shape()[1]});
}

ForwardRecord forward(const Model& model, const Tensor& image, bool capture,
                      std::size_t capture_stage) {
    const ModelConfig& c = model.config;
    const Shape expect = {c.channels, c.image_size, c.image_size};
    if (image.shape() != expect) {
        throw ShapeError("forward: image " + shape_str(image.shape()) + " does not match config " +
                         shape_str(expect));
    }
    const std::size_t stages = c.stage_embed_dims.size();
    if (capture_stage == kCaptureFinalStage) capture_stage = stages - 1;
    if (capture && capture_stage >= stages) {
        throw ConfigError("capture stage " + std::to_string(capture_stage) + " out of range");
    }

    // patch extraction: one gather producing [n_tokens, c*p*p]
    const std::size_t p = c.patch_size;
    const std::size_t g = c.image_size / p;
    std::vector<std::size_t> idx;
    idx.reserve(g * g * c.channels * p * p);
    for (std::size_t ty = 0; ty < g; ++ty) {
        for (std::size_t tx = 0; tx < g; ++tx) {
            for (std::size_t ch = 0; ch < c.channels; ++ch) {
                for (std::size_t py = 0; py < p; ++py) {
                    for (std::size_t px = 0; px < p; ++px) {
                        idx.push_back((ch * c.image_size + ty * p + py) * c.image_size + tx * p +
                                      px);
                    }
                }
            }
        }
    }
    Tensor x = ops::gather(image, std::move(idx), {g * g, c.channels * p * p});
    x = ops::add_bias(ops::matmul(x, model.param("patch_embed.weight")),
                      model.param("patch_embed.bias"));

    ForwardRecord record{Tensor::zeros({1}), std::nullopt};
    std::size_t side = g;
    for (std::size_t s = 0; s < stages; ++s) {
        const std::size_t d = c.stage_embed_dims[s];
        const std::size_t heads = c.heads_per_stage[s];
        const std::size_t dk = d / heads;
        const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
        for (std::size_t b = 0; b < c.stage_depths[s]; ++b) {
            const std::string pb = stage_block(s, b);
            Tensor h1 = ops::layer_norm(x, model.param(pb + "ln1.gamma"),
                                        model.param(pb + "ln1.beta"));
            std::vector<Tensor> head_outs;
            head_outs.reserve(heads);
            for (std::size_t hh = 0; hh < heads; ++hh) {
                const std::string hp = pb + "attn.h" + std::to_string(hh) + ".";
                Tensor q = ops::add_bias(ops::matmul(h1, model.param(hp + "wq")),
                                         model.param(hp + "bq"));
                Tensor k = ops::add_bias(ops::matmul(h1, model.param(hp + "wk")),
                                         model.param(hp + "bk"));
                Tensor v = ops::add_bias(ops::matmul(h1, model.param(hp + "wv")),
                                         model.param(hp + "bv"));
                Tensor scores = ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt_dk);
                head_outs.push_back(ops::matmul(ops::softmax(scores, 1), v));
            }
            Tensor attn = head_outs.size() == 1 ? head_outs[0] : ops::concat(head_outs, 1);
            attn = ops::add_bias(ops::matmul(attn, model.param(pb + "attn.proj.weight")),
                                 model.param(pb + "attn.proj.bias"));
            x = ops::add(x, attn);

            Tensor h2 = ops::layer_norm(x, model.param(pb + "ln2.gamma"),
                                        model.param(pb + "ln2.beta"));
            Tensor m = ops::gelu(ops::add_bias(ops::matmul(h2, model.param(pb + "mlp.fc1.weight")),
                                               model.param(pb + "mlp.fc1.bias")));
            m = ops::add_bias(ops::matmul(m, model.param(pb + "mlp.fc2.weight")),
                              model.param(pb + "mlp.fc2.bias"));
            x = ops::add(x, m);
        }
        if (capture && s == capture_stage) {
            // reshape sits on the main path, so the captured node receives the
            // true upstream gradient during backward
            Tensor grid = ops::reshape(x, {side, side, d});
            record.captured = grid;
            x = ops::reshape(grid, {side * side, d});
        }
        if (s + 1 < stages) {
            Tensor grid = ops::reshape(x, {side, side, d});
            Tensor merged = patch_merge(grid, model.param("merge" + std::to_string(s) + ".weight"),
                                        model.param("merge" + std::to_string(s) + ".bias"));
            side /= 2;
            x = ops::reshape(merged, {side * side, c.stage_embed_dims[s + 1]});
        }
    }

    Tensor pooled = ops::mean_axis(x, 0);  // [d]
    pooled = ops::layer_norm(pooled, model.param("head.ln.gamma"), model.param("head.ln.beta"));
    Tensor logits = ops::add_bias(ops::matmul(ops::reshape(pooled, {1, pooled.size()}),
                                              model.param("head.weight")),
                                  model.param("head.bias"));
    record.logits = ops::reshape(logits, {c.num_classes});
    for (double v : record.logits.data()) {
        if (!std::isfinite(v)) throw DomainError("forward: non-finite logit");
    }
    return record;
}

void save_checkpoint(const Model& model, const std::filesystem::path& manifest_path) {
    std::filesystem::path blob_path = manifest_path;
    blob_path.replace_extension(".atsr");

    std::size_t total = 0;
    for (const auto& [name, t] : model.params) total += t.size();
    std::vector<double> blob;
    blob.reserve(total);
    nlohmann::json index = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& [name, t] : model.params) {
        index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        blob.insert(blob.end(), t.data().begin(), t.data().end());
        offset += t.size();
    }
    nlohmann::json manifest = {{"schema_version", 1},
                               {"config", config_to_json(model.config)},
                               {"blob", blob_path.filename().string()},
                               {"params", index}};
    write_tensor(blob_path, Tensor::from_data({total}, std::move(blob)));
    atomic_write_file(manifest_path, manifest.dump(2) + "\n");
}

Model load_checkpoint(const std::filesystem::path& manifest_path) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path.string() + ": " + e.what());
    }
    if (!manifest.contains("config") || !manifest.contains("params") ||
        !manifest.contains("blob")) {
        throw ParseError(manifest_path.string() + ": manifest missing config/params/blob");
    }
    Model model;
    model.config = config_from_json(manifest["config"]);
    validate_config(model.config);

    const std::filesystem::path blob_path =
        manifest_path.parent_path() / manifest["blob"].get<std::string>();
    Tensor blob = read_tensor(blob_path);

    for (const auto& entry : manifest["params"]) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<Shape>();
        const auto offset = entry.at("offset").get<std::size_t>();
        const std::size_t n = shape_numel(shape);
        if (offset + n > blob.size()) {
            throw ParseError(manifest_path.string() + ": parameter '" + name +
                             "' overruns the blob");
        }
        std::vector<double> v(blob.data().begin() + static_cast<std::ptrdiff_t>(offset),
                              blob.data().begin() + static_cast<std::ptrdiff_t>(offset + n));
        model.params.emplace(name, Tensor::from_data(shape, std::move(v)));
    }

    // the loaded set must be exactly the config's parameter set
    std::size_t expected = 0;
    walk_params(model.config, [&](const std::string& name, const Shape& shape, bool) {
        ++expected;
        auto it = model.params.find(name);
        if (it == model.params.end()) {
            throw ParseError(manifest_path.string() + ": missing parameter '" + name + "'");
        }
        if (it->second.shape() != shape) {
            throw ParseError(manifest_path.string() + ": parameter '" + name + "' has shape " +
                             shape_str(it->second.shape()) + ", config requires " +
                             shape_str(shape));
        }
    });
    if (model.params.size() != expected) {
        throw ParseError(manifest_path.string() + ": manifest lists " +
                         std::to_string(model.params.size()) + " parameters, config requires " +
                         std::to_string(expected));
    }
    return model;
}

}  // namespace attribroi
