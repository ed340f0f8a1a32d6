#pragma once

// Hierarchical vision transformer at desk scale: linear patch embedding,
// pre-norm attention/MLP blocks per stage, 2x2 patch merging between stages,
// mean-pool -> layer-norm -> linear head. Full self-attention (at <=256
// tokens the window is the whole grid).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "attribroi/tensor.hpp"

namespace attribroi {

struct ModelConfig {
    std::size_t image_size = 64;
    std::size_t channels = 1;
    std::size_t patch_size = 4;
    std::vector<std::size_t> stage_embed_dims = {16, 32};
    std::vector<std::size_t> stage_depths = {1, 1};
    std::vector<std::size_t> heads_per_stage = {2, 4};
    std::size_t mlp_ratio = 4;
    std::size_t num_classes = 2;
    std::uint64_t seed = 0;
};

void validate_config(const ModelConfig& config);  // ConfigError names the field
std::size_t param_count(const ModelConfig& config);

struct Model {
    ModelConfig config;
    std::map<std::string, Tensor> params;  // sorted names; stable traversal

    Tensor& param(const std::string& name);
    const Tensor& param(const std::string& name) const;
    void set_requires_grad(bool rg);
    void zero_grad();
};

Model init_model(const ModelConfig& config);

struct ForwardRecord {
    Tensor logits;                      // [num_classes]
    std::optional<Tensor> captured;     // [h,w,d] token grid of the capture stage

    const Tensor& captured_tokens() const;
    Tensor captured_tokens_grad() const;  // snapshot after backward
};

// capture_stage defaults to the final stage's pre-pooling token grid.
inline constexpr std::size_t kCaptureFinalStage = static_cast<std::size_t>(-1);

ForwardRecord forward(const Model& model, const Tensor& image, bool capture = false,
                      std::size_t capture_stage = kCaptureFinalStage);

// 2x2 neighborhoods concatenated (TL,TR,BL,BR) then projected by weight/bias.
Tensor patch_merge(const Tensor& tokens, const Tensor& weight, const Tensor& bias);

// Checkpoint = JSON manifest (config + named-parameter index) + one ATSR blob
// next to it.
void save_checkpoint(const Model& model, const std::filesystem::path& manifest_path);
Model load_checkpoint(const std::filesystem::path& manifest_path);

}  // namespace attribroi
