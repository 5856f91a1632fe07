#include "sadepth/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <unordered_set>

namespace sadepth {

namespace {
std::atomic<uint64_t> g_next_id{1};
thread_local bool g_no_grad = false;
} // namespace

NoGradGuard::NoGradGuard() : prev_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = prev_; }
bool NoGradGuard::active() { return g_no_grad; }

Var::Var(Tensor value, bool requires_grad) {
    node_ = std::make_shared<detail::Node>();
    node_->value = std::move(value);
    node_->requires_grad = requires_grad && !g_no_grad;
    node_->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
}

Var Var::make_op(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backward) {
    bool any_grad = false;
    for (const Var& v : inputs) {
        if (v.defined() && v.node_->requires_grad) {
            any_grad = true;
            break;
        }
    }
    if (g_no_grad || !any_grad) {
        return Var(std::move(value), false);
    }
    Var out(std::move(value), true);
    out.node_->parents.reserve(inputs.size());
    for (const Var& v : inputs) {
        if (v.defined()) out.node_->parents.push_back(v.node_);
    }
    out.node_->backward = std::move(backward);
    return out;
}

void Var::backward() const {
    if (!defined()) throw std::logic_error("backward on undefined Var");
    if (node_->value.numel() != 1) throw std::logic_error("backward requires a scalar root");
    if (!node_->requires_grad) return;

    // Collect the reachable subgraph; creation ids give a topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<detail::Node*> stack{node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
        detail::Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) {
                stack.push_back(p.get());
            }
        }
    }
    std::sort(order.begin(), order.end(),
              [](const detail::Node* a, const detail::Node* b) { return a->id > b->id; });

    node_->ensure_grad()[0] += 1.0;
    for (detail::Node* n : order) {
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

} // namespace sadepth
