#include "attribroi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "attribroi/errors.hpp"
#include "attribroi/ops.hpp"
#include "attribroi/rng.hpp"

namespace attribroi {

namespace {

// seed-stream tags so shuffle/augment draws stay independent
constexpr std::uint64_t kStreamSplit = 0x51;
constexpr std::uint64_t kStreamShuffle = 0x52;
constexpr std::uint64_t kStreamAugment = 0x53;

}  // namespace

void validate_train(const TrainConfig& config) {
    if (config.learning_rate <= 0.0) {
        throw ConfigError("train config field 'learning_rate': must be positive");
    }
    if (config.weight_decay < 0.0) {
        throw ConfigError("train config field 'weight_decay': must be >= 0");
    }
    if (config.epochs == 0) {
        throw ConfigError("train config field 'epochs': must be positive");
    }
    if (config.batch_size == 0) {
        throw ConfigError("train config field 'batch_size': must be positive");
    }
    if (config.val_fraction < 0.0 || config.val_fraction >= 1.0) {
        throw ConfigError("train config field 'val_fraction': outside [0,1)");
    }
    const auto check_factor = [](double f, const char* field) {
        if (f <= 0.0 || f > 1.0) {
            throw ConfigError(std::string("train config field '") + field +
                              "': factor outside (0,1]");
        }
    };
    check_factor(config.schedule.multistep.factor, "multistep.factor");
    check_factor(config.schedule.plateau.factor, "plateau.factor");
    if (config.schedule.multistep.interval_epochs == 0) {
        throw ConfigError("train config field 'multistep.interval_epochs': must be >= 1");
    }
    if (config.schedule.plateau.patience_epochs == 0) {
        throw ConfigError("train config field 'plateau.patience_epochs': must be >= 1");
    }
    if (config.augment.centre_crop && config.augment.crop_size == 0) {
        throw ConfigError("train config field 'augment.crop_size': required with centre_crop");
    }
    if (config.distill) validate_distill(*config.distill);
}

TrainConfig preset_config(const std::string& name, std::size_t divisor) {
    if (divisor == 0) throw ConfigError("preset: divisor must be positive");
    TrainConfig c;
    if (name == "vit-teacher" || name == "vit-student") {
        c.optimizer = OptimizerKind::adamw;
        c.learning_rate = 3.6e-5;
        c.weight_decay = 1e-4;
        c.schedule.kind = ScheduleKind::multistep;
        c.schedule.multistep = {10, 0.1};
        c.epochs = name == "vit-teacher" ? 65 : 40;
    } else if (name == "tinyvit5m-teacher" || name == "tinyvit21m-teacher" ||
               name == "student") {
        c.optimizer = OptimizerKind::adam;
        c.learning_rate = 9.56e-4;
        c.weight_decay = 1e-4;
        c.schedule.kind = ScheduleKind::plateau;
        c.schedule.plateau = {0.5, 3};
        c.epochs = name == "tinyvit5m-teacher" ? 100
                   : name == "tinyvit21m-teacher" ? 50
                                                  : 40;
    } else {
        throw ConfigError("preset: unknown name '" + name + "'");
    }
    c.schedule.base_lr = c.learning_rate;
    c.epochs = std::max<std::size_t>(1, c.epochs / divisor);
    return c;
}

std::vector<std::string> preset_names() {
    return {"vit-teacher", "vit-student", "tinyvit5m-teacher", "tinyvit21m-teacher",
            "student"};
}

std::vector<double> class_weights(const std::vector<std::size_t>& label_counts) {
    if (label_counts.empty()) throw ContractError("class_weights: no classes");
    std::size_t total = 0;
    for (std::size_t c : label_counts) total += c;
    std::vector<double> w(label_counts.size());
    for (std::size_t i = 0; i < label_counts.size(); ++i) {
        if (label_counts[i] == 0) {
            throw DomainError("class_weights: class " + std::to_string(i) +
                              " has no samples");
        }
        w[i] = static_cast<double>(total) /
               (static_cast<double>(label_counts.size()) *
                static_cast<double>(label_counts[i]));
    }
    return w;
}

namespace {

double val_loss_over(const Model& model, const Dataset& data,
                     const std::vector<std::size_t>& indices) {
    NoGradGuard guard;
    double sum = 0.0;
    for (std::size_t idx : indices) {
        const Sample& s = data.samples[idx];
        const Tensor input = to_model_input(s.image, model.config.channels);
        const ForwardRecord fr = forward(model, input);
        sum += cross_entropy(fr.logits, static_cast<std::size_t>(s.label)).value();
    }
    return sum / static_cast<double>(indices.size());
}

int predict(const Model& model, const Tensor& input) {
    const ForwardRecord fr = forward(model, input);
    const auto logits = fr.logits.data();
    int best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k) {
        if (logits[k] > logits[best]) best = static_cast<int>(k);
    }
    return best;
}

}  // namespace

Metrics evaluate_indices(const Model& model, const Dataset& data,
                         const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw ContractError("evaluate: empty set");
    NoGradGuard guard;
    Metrics m;
    for (std::size_t idx : indices) {
        const Sample& s = data.samples[idx];
        if (s.label < 0 || s.label > 1) {
            throw ContractError("evaluate: binary labels required, got " +
                                std::to_string(s.label));
        }
        const Tensor input = to_model_input(s.image, model.config.channels);
        const bool predicted_positive = predict(model, input) == 1;
        if (s.label == 1) {
            predicted_positive ? ++m.tp : ++m.fn;
        } else {
            predicted_positive ? ++m.fp : ++m.tn;
        }
    }
    return m;
}

Metrics evaluate(const Model& model, const Dataset& data) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return evaluate_indices(model, data, all);
}

TrainResult train(Model& model, const Dataset& data, const TrainConfig& config,
                  const Model* teacher) {
    validate_train(config);
    if (data.empty()) throw ContractError("train: empty dataset");
    if (config.distill.has_value() != (teacher != nullptr)) {
        throw ConfigError(config.distill
                              ? "train: distill config set but no teacher given"
                              : "train: teacher given without a distill config");
    }
    if (teacher) {
        if (teacher->config.num_classes != model.config.num_classes) {
            throw ConfigError("train: teacher emits " +
                              std::to_string(teacher->config.num_classes) +
                              " classes, student " +
                              std::to_string(model.config.num_classes));
        }
        if (teacher->config.image_size != model.config.image_size ||
            teacher->config.channels != model.config.channels) {
            throw ConfigError("train: teacher and student input dims differ");
        }
    }

    TrainResult result;
    const SplitIndices split = train_val_split(
        data.size(), config.val_fraction, derive_seed(config.seed, kStreamSplit));
    result.train_indices = split.train;
    result.val_indices = split.val;
    const std::vector<std::size_t>& eval_set =
        split.val.empty() ? split.train : split.val;

    std::optional<std::vector<double>> weights;
    if (config.use_class_weights) {
        std::vector<std::size_t> counts(model.config.num_classes, 0);
        for (std::size_t idx : split.train) {
            const int label = data.samples[idx].label;
            if (label < 0 || static_cast<std::size_t>(label) >= counts.size()) {
                throw IndexError("train: label " + std::to_string(label) +
                                 " outside 0.." +
                                 std::to_string(counts.size() - 1));
            }
            ++counts[static_cast<std::size_t>(label)];
        }
        weights = class_weights(counts);
    }

    model.set_requires_grad(true);
    model.zero_grad();
    Optimizer opt(config.optimizer, config.learning_rate, config.weight_decay);
    PlateauTracker plateau(config.learning_rate, config.schedule.plateau);

    std::vector<std::size_t> order = split.train;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.schedule.kind == ScheduleKind::multistep
                              ? multistep_lr(config.learning_rate,
                                             config.schedule.multistep, epoch)
                              : plateau.lr();
        opt.set_lr(lr);

        std::mt19937_64 shuffle_rng(derive_seed(config.seed, kStreamShuffle, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(start + config.batch_size, order.size());
            Tensor batch_sum;
            for (std::size_t i = start; i < stop; ++i) {
                const Sample& s = data.samples[order[i]];
                const std::uint64_t aug_seed = derive_seed(
                    derive_seed(config.seed, kStreamAugment, epoch), 0, order[i]);
                const Tensor input =
                    augment(to_model_input(s.image, model.config.channels),
                            config.augment, aug_seed);
                const ForwardRecord fr = forward(model, input);
                Tensor loss =
                    cross_entropy(fr.logits, static_cast<std::size_t>(s.label), weights);
                if (teacher) {
                    Tensor teacher_logits;
                    {
                        NoGradGuard guard;
                        teacher_logits = forward(*teacher, input).logits;
                    }
                    const Tensor ld = distill_loss(teacher_logits, fr.logits,
                                                   config.distill->temperature);
                    loss = final_loss(loss, ld, config.distill->alpha);
                }
                batch_sum = i == start ? loss : ops::add(batch_sum, loss);
            }
            const Tensor batch_loss =
                ops::scale(batch_sum, 1.0 / static_cast<double>(stop - start));
            if (!std::isfinite(batch_loss.value())) {
                throw TrainAbort("non-finite loss at epoch " + std::to_string(epoch));
            }
            batch_loss.backward();
            ComputationRecord::active().clear();
            opt.step(model);
            model.zero_grad();
            loss_sum += batch_loss.value() * static_cast<double>(stop - start);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.val_loss = val_loss_over(model, data, eval_set);
        stats.val_metrics = evaluate_indices(model, data, eval_set);
        result.log.push_back(stats);

        if (config.schedule.kind == ScheduleKind::plateau) {
            plateau.observe(stats.val_loss);
        }
    }
    return result;
}

std::string epoch_log_to_jsonl(const std::vector<EpochStats>& log) {
    std::ostringstream out;
    for (const EpochStats& e : log) {
        const nlohmann::json line = {
            {"epoch", e.epoch},
            {"lr", e.lr},
            {"train_loss", e.train_loss},
            {"val_loss", e.val_loss},
            {"val_accuracy", round2(e.val_metrics.accuracy())},
            {"val_f1", round2(e.val_metrics.f1())},
        };
        out << line.dump() << "\n";
    }
    return out.str();
}

}  // namespace attribroi
