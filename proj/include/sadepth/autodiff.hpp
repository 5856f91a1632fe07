#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sadepth/tensor.hpp"

namespace sadepth {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad; // allocated lazily, same shape as value
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward; // pulls this->grad into parents' grads
    bool requires_grad = false;
    uint64_t id = 0;

    Tensor& ensure_grad() {
        if (grad.empty()) grad = Tensor(value.shape());
        return grad;
    }
};

} // namespace detail

/// Handle to a node in the dynamically built computation graph. Copying a Var
/// aliases the node. Ops that receive only non-requires_grad inputs produce
/// leaf constants, so inference builds no tape.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    static Var constant(Tensor value) { return Var(std::move(value), false); }
    static Var param(Tensor value) { return Var(std::move(value), true); }

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    // A Var is a handle; the node is shared mutable state, so mutators are
    // const-qualified the way shared_ptr access is.
    Tensor& value_mut() const { return node_->value; }
    Tensor& grad() const { return node_->ensure_grad(); }
    bool has_grad() const { return defined() && !node_->grad.empty(); }
    bool requires_grad() const { return defined() && node_->requires_grad; }
    const std::vector<int64_t>& shape() const { return node_->value.shape(); }
    int64_t numel() const { return node_->value.numel(); }

    void zero_grad() const {
        if (defined() && !node_->grad.empty()) node_->grad.fill(0.0);
    }

    /// Reverse pass from a scalar. Accumulates into .grad() of every reachable
    /// requires_grad node.
    void backward() const;

    /// New op node. `backward` distributes the node's grad to its parents.
    static Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backward);

    std::shared_ptr<detail::Node> node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

/// While an instance is alive, make_op produces constants: no parents, no
/// backward closures. Used for inference/evaluation passes.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
    static bool active();

private:
    bool prev_;
};

} // namespace sadepth
