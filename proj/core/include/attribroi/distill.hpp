#pragma once

// Loss algebra: weighted cross-entropy, KL divergence, and their
// alpha-weighted composite. The teacher side of the distillation term is
// detached, so gradient reaches only the student.

#include <optional>
#include <vector>

#include "attribroi/tensor.hpp"

namespace attribroi {

struct DistillConfig {
    double alpha = 0.5;
    double temperature = 1.0;
};

void validate_distill(const DistillConfig& config);

// -w_label * log softmax(logits)[label]
Tensor cross_entropy(const Tensor& logits, std::size_t label,
                     const std::optional<std::vector<double>>& class_weights = std::nullopt);

// sum p_i * log(p_i / q_i); inputs must each sum to 1 within 1e-6, entries >= 0.
Tensor kl_divergence(const Tensor& p, const Tensor& q);

// KL(softmax(teacher/T) || softmax(student/T))
Tensor distill_loss(const Tensor& teacher_logits, const Tensor& student_logits,
                    double temperature = 1.0);

// l_model * alpha + l_distill * (1 - alpha)
Tensor final_loss(const Tensor& l_model, const Tensor& l_distill, double alpha);

}  // namespace attribroi
