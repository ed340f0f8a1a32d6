#include "attribroi/distill.hpp"

#include <cmath>
#include <string>

#include "attribroi/errors.hpp"
#include "attribroi/ops.hpp"

namespace attribroi {

void validate_distill(const DistillConfig& config) {
    if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
        throw ConfigError("distill alpha " + std::to_string(config.alpha) +
                          " outside [0, 1]");
    }
    if (!(config.temperature > 0.0)) {
        throw ConfigError("distill temperature must be positive, got " +
                          std::to_string(config.temperature));
    }
}

Tensor cross_entropy(const Tensor& logits, std::size_t label,
                     const std::optional<std::vector<double>>& class_weights) {
    if (logits.rank() != 1) {
        throw ShapeError("cross_entropy: rank-1 logits required, got " +
                         shape_str(logits.shape()));
    }
    const std::size_t k = logits.size();
    if (label >= k) {
        throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                         std::to_string(k) + " classes");
    }
    double w = 1.0;
    if (class_weights) {
        if (class_weights->size() != k) {
            throw ShapeError("cross_entropy: " + std::to_string(class_weights->size()) +
                             " class weights for " + std::to_string(k) + " classes");
        }
        for (double cw : *class_weights) {
            if (!(cw > 0.0)) throw ContractError("cross_entropy: class weights must be positive");
        }
        w = (*class_weights)[label];
    }
    Tensor prob = ops::gather(ops::softmax(logits, 0), {label}, {1});
    return ops::scale(ops::log(prob), -w);
}

Tensor kl_divergence(const Tensor& p, const Tensor& q) {
    if (p.shape() != q.shape() || p.rank() != 1) {
        throw ShapeError("kl_divergence: rank-1 vectors of equal length required, got " +
                         shape_str(p.shape()) + " and " + shape_str(q.shape()));
    }
    for (const Tensor* t : {&p, &q}) {
        double total = 0.0;
        for (double v : t->data()) {
            if (v < 0.0) throw DomainError("kl_divergence: negative probability entry");
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-6) {
            throw DomainError("kl_divergence: input sums to " + std::to_string(total) +
                              ", not 1");
        }
    }
    // p_i = 0 terms contribute exactly 0: the factor p_i multiplies away the
    // clamped log.
    return ops::sum(ops::mul(p, ops::sub(ops::log(p), ops::log(q))));
}

Tensor distill_loss(const Tensor& teacher_logits, const Tensor& student_logits,
                    double temperature) {
    if (teacher_logits.shape() != student_logits.shape() || teacher_logits.rank() != 1) {
        throw ShapeError("distill_loss: logit shapes differ: " +
                         shape_str(teacher_logits.shape()) + " vs " +
                         shape_str(student_logits.shape()));
    }
    if (!(temperature > 0.0)) {
        throw ConfigError("distill_loss: temperature must be positive");
    }
    const double inv_t = 1.0 / temperature;
    Tensor p = ops::softmax(ops::scale(teacher_logits.detach(), inv_t), 0);
    Tensor q = ops::softmax(ops::scale(student_logits, inv_t), 0);
    return ops::sum(ops::mul(p, ops::sub(ops::log(p), ops::log(q))));
}

Tensor final_loss(const Tensor& l_model, const Tensor& l_distill, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("final_loss: alpha " + std::to_string(alpha) + " outside [0, 1]");
    }
    return ops::add(ops::scale(l_model, alpha), ops::scale(l_distill, 1.0 - alpha));
}

}  // namespace attribroi
