#include "attribroi/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "attribroi/errors.hpp"

namespace attribroi {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

void TensorNode::set_requires_grad(bool rg) {
    requires_grad = rg;
    if (rg) {
        grad.assign(values.size(), 0.0);
    } else {
        grad.clear();
        grad.shrink_to_fit();
    }
}

namespace {

std::shared_ptr<TensorNode> make_node(const Shape& shape, std::vector<double> values,
                                      bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = shape;
    node->values = std::move(values);
    node->set_requires_grad(requires_grad);
    return node;
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    return Tensor(make_node(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad));
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
    return Tensor(make_node(shape, std::vector<double>(shape_numel(shape), value), requires_grad));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> values, bool requires_grad) {
    return Tensor(make_node(shape, std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

std::span<const double> Tensor::grad() const {
    if (!node_->requires_grad) {
        throw ContractError("grad accessed on a tensor without requires_grad");
    }
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::value() const {
    if (size() != 1) {
        throw ContractError("value() requires a scalar tensor, got shape " + shape_str(shape()));
    }
    return node_->values[0];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != rank()) {
        throw IndexError("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                         std::to_string(rank()));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
        if (i >= node_->shape[axis]) {
            throw IndexError("index " + std::to_string(i) + " out of range for axis " +
                             std::to_string(axis) + " of shape " + shape_str(shape()));
        }
        flat = flat * node_->shape[axis] + i;
        ++axis;
    }
    return node_->values[flat];
}

Tensor Tensor::detach() const {
    return from_data(shape(), node_->values, false);
}

void Tensor::backward() const {
    if (size() != 1) {
        throw ContractError("backward() requires a scalar output, got shape " +
                            shape_str(shape()));
    }
    if (!node_->requires_grad) {
        throw ContractError("backward() on a tensor that does not require grad");
    }
    ComputationRecord::active().backward_from(node_);
}

ComputationRecord& ComputationRecord::active() {
    thread_local ComputationRecord record;
    return record;
}

void ComputationRecord::push(std::shared_ptr<TensorNode> output, std::function<void()> backprop) {
    output->is_step_output = true;
    steps_.push_back(Step{std::move(output), std::move(backprop)});
}

void ComputationRecord::clear() { steps_.clear(); }

void ComputationRecord::backward_from(const std::shared_ptr<TensorNode>& output) {
    // Intermediate grads are per-sweep scratch; leaf grads persist so that
    // repeated sweeps accumulate.
    for (auto& step : steps_) {
        std::fill(step.output->grad.begin(), step.output->grad.end(), 0.0);
    }
    if (output->is_step_output) {
        output->grad[0] = 1.0;
    } else {
        output->grad[0] += 1.0;  // leaf scalar: d(output)/d(output) = 1
        return;
    }
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
        it->backprop();
    }
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

}  // namespace attribroi
