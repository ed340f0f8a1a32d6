#pragma once

// Fine-tuning loop: seeded shuffling, augmentation, weighted cross-entropy
// (optionally blended with a distillation term), Adam/AdamW updates under a
// multistep or plateau schedule, per-epoch validation metrics.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "attribroi/augment.hpp"
#include "attribroi/dataset.hpp"
#include "attribroi/distill.hpp"
#include "attribroi/metrics.hpp"
#include "attribroi/model.hpp"
#include "attribroi/optim.hpp"

namespace attribroi {

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 9.56e-4;
    double weight_decay = 1e-4;
    ScheduleSpec schedule;  // base_lr is taken from learning_rate
    std::size_t epochs = 10;
    std::size_t batch_size = 8;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
    bool use_class_weights = true;
    AugmentConfig augment;
    std::optional<DistillConfig> distill;
};

void validate_train(const TrainConfig& config);

// Named hyperparameter presets; epochs shrink by `divisor` (floor, min 1) so
// the presets stay runnable on one desk.
TrainConfig preset_config(const std::string& name, std::size_t divisor = 1);
std::vector<std::string> preset_names();

// w_c = total / (num_classes * count_c); balanced counts give all ones.
std::vector<double> class_weights(const std::vector<std::size_t>& label_counts);

struct EpochStats {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    Metrics val_metrics;
};

struct TrainResult {
    std::vector<EpochStats> log;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> val_indices;
};

// Teacher must be present exactly when config.distill is set. Validation
// loss is always plain unweighted cross-entropy. An empty validation split
// falls back to the training split for loss and metrics.
TrainResult train(Model& model, const Dataset& data, const TrainConfig& config,
                  const Model* teacher = nullptr);

// Confusion counts over the set with class 1 as positive; argmax ties go to
// the lowest class index.
Metrics evaluate(const Model& model, const Dataset& data);
Metrics evaluate_indices(const Model& model, const Dataset& data,
                         const std::vector<std::size_t>& indices);

// One JSON object per line, one line per epoch.
std::string epoch_log_to_jsonl(const std::vector<EpochStats>& log);

}  // namespace attribroi
