#pragma once

// Adam / AdamW with bias correction, plus the two learning-rate schedules:
// multistep decay and reduce-on-plateau.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "attribroi/model.hpp"

namespace attribroi {

enum class OptimizerKind { adam, adamw };

class Optimizer {
  public:
    Optimizer(OptimizerKind kind, double learning_rate, double weight_decay);

    // One update over every parameter that requires grad. A non-finite
    // gradient aborts, naming the parameter.
    void step(Model& model);

    void set_lr(double lr);
    double lr() const { return lr_; }
    std::size_t steps_taken() const { return t_; }

  private:
    OptimizerKind kind_;
    double lr_;
    double weight_decay_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::size_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

struct MultistepSchedule {
    std::size_t interval_epochs = 10;
    double factor = 0.1;
};

struct PlateauSchedule {
    double factor = 0.5;
    std::size_t patience_epochs = 3;
};

// base * factor^floor(epoch / interval); epochs count from 0.
double multistep_lr(double base_lr, const MultistepSchedule& sched, std::size_t epoch);

// Cuts the rate after `patience` consecutive epochs without the validation
// loss improving by at least 1e-8, then resets the stall counter.
class PlateauTracker {
  public:
    PlateauTracker(double base_lr, const PlateauSchedule& sched);
    double observe(double val_loss);  // returns the rate for the next epoch
    double lr() const { return lr_; }

  private:
    PlateauSchedule sched_;
    double lr_;
    double best_;
    std::size_t stall_ = 0;
};

enum class ScheduleKind { multistep, plateau };

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::plateau;
    double base_lr = 1e-3;
    MultistepSchedule multistep;
    PlateauSchedule plateau;
};

// Stateless replay: multistep keys off history length (epochs completed);
// plateau replays the loss history through a tracker.
double schedule_lr(const ScheduleSpec& spec, const std::vector<double>& val_loss_history);

}  // namespace attribroi
