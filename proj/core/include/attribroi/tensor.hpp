#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace attribroi {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Storage node shared by tensor handles. `grad` is allocated (zero-filled)
// exactly when requires_grad is set, and always matches `values` in length.
struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    bool is_step_output = false;  // produced by a recorded primitive

    void set_requires_grad(bool rg);
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value, bool requires_grad = false);
    static Tensor from_data(const Shape& shape, std::vector<double> values,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->values.size(); }
    std::size_t rank() const { return node_->shape.size(); }

    std::span<const double> data() const { return node_->values; }
    std::span<double> data() { return node_->values; }
    std::span<const double> grad() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->set_requires_grad(rg); }
    void zero_grad();

    // Scalar convenience accessors.
    double value() const;
    double at(std::initializer_list<std::size_t> idx) const;

    // Value copy that is detached from any gradient graph.
    Tensor detach() const;

    // Reverse-mode sweep from this scalar; leaf grads accumulate across
    // calls, intermediate grads are recomputed per call.
    void backward() const;

    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// Ordered log of executed primitives for one forward pass; replayed in
// reverse to apply the chain rule. Execution order is a topological order
// by construction (an operation's inputs exist before it runs).
class ComputationRecord {
public:
    struct Step {
        std::shared_ptr<TensorNode> output;
        std::function<void()> backprop;
    };

    static ComputationRecord& active();

    void push(std::shared_ptr<TensorNode> output, std::function<void()> backprop);
    void clear();
    std::size_t size() const { return steps_.size(); }

    void backward_from(const std::shared_ptr<TensorNode>& output);

private:
    std::vector<Step> steps_;
};

// Disables gradient tracking (and recording) within a scope. Forward
// passes under the guard are pure reads and safe to run concurrently.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool grad_enabled();

private:
    bool previous_;
};

}  // namespace attribroi
