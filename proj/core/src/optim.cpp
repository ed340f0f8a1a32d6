#include "attribroi/optim.hpp"

#include <cmath>
#include <limits>

#include "attribroi/errors.hpp"

namespace attribroi {

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double weight_decay)
    : kind_(kind), lr_(learning_rate), weight_decay_(weight_decay) {
    if (!(learning_rate > 0.0)) throw ConfigError("optimizer learning rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("optimizer weight decay must be nonnegative");
}

void Optimizer::set_lr(double lr) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must stay positive");
    lr_ = lr;
}

void Optimizer::step(Model& model) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, p] : model.params) {
        if (!p.requires_grad()) continue;
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.empty()) {
            m.assign(p.size(), 0.0);
            v.assign(p.size(), 0.0);
        }
        auto grad = p.grad();
        auto& node = *p.node();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = grad[i];
            if (!std::isfinite(g)) {
                throw TrainAbort("non-finite gradient in parameter '" + name + "' at index " +
                                 std::to_string(i));
            }
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            double update = lr_ * mhat / (std::sqrt(vhat) + eps_);
            if (kind_ == OptimizerKind::adamw) {
                update += lr_ * weight_decay_ * node.values[i];
            }
            node.values[i] -= update;
        }
    }
}

double multistep_lr(double base_lr, const MultistepSchedule& sched, std::size_t epoch) {
    if (sched.interval_epochs == 0) throw ConfigError("multistep interval must be positive");
    if (!(sched.factor > 0.0 && sched.factor <= 1.0)) {
        throw ConfigError("multistep factor must be in (0, 1]");
    }
    return base_lr * std::pow(sched.factor, static_cast<double>(epoch / sched.interval_epochs));
}

PlateauTracker::PlateauTracker(double base_lr, const PlateauSchedule& sched)
    : sched_(sched), lr_(base_lr), best_(std::numeric_limits<double>::infinity()) {
    if (!(sched.factor > 0.0 && sched.factor <= 1.0)) {
        throw ConfigError("plateau factor must be in (0, 1]");
    }
    if (sched.patience_epochs == 0) throw ConfigError("plateau patience must be at least 1");
}

double PlateauTracker::observe(double val_loss) {
    if (best_ - val_loss >= 1e-8) {
        best_ = val_loss;
        stall_ = 0;
    } else {
        ++stall_;
        if (stall_ >= sched_.patience_epochs) {
            lr_ *= sched_.factor;
            stall_ = 0;
        }
    }
    return lr_;
}

double schedule_lr(const ScheduleSpec& spec, const std::vector<double>& val_loss_history) {
    if (spec.kind == ScheduleKind::multistep) {
        return multistep_lr(spec.base_lr, spec.multistep, val_loss_history.size());
    }
    if (val_loss_history.empty()) {
        throw ContractError("plateau schedule requires a nonempty loss history");
    }
    PlateauTracker tracker(spec.base_lr, spec.plateau);
    double lr = spec.base_lr;
    for (double loss : val_loss_history) lr = tracker.observe(loss);
    return lr;
}

}  // namespace attribroi
