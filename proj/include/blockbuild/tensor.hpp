#pragma once

#include "blockbuild/errors.hpp"
#include "blockbuild/rng.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

namespace blockbuild {

struct ShapeMismatch : DataError {
    using DataError::DataError;
};

struct NotScalar : NumericError {
    using NumericError::NumericError;
};

inline std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

inline std::string shape_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Reverse-mode autodiff node. TensorT is a shared handle onto it; ops link
// nodes into a DAG and attach a closure that pushes gradient to the parents.
template <class Real>
struct TensorNode {
    std::vector<int> shape;
    std::vector<Real> data;
    std::vector<Real> grad; // allocated iff requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backward_fn;

    bool is_leaf() const { return parents.empty(); }
};

template <class Real>
class TensorT {
public:
    TensorT() = default;

    static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
        TensorT t;
        t.node_ = std::make_shared<TensorNode<Real>>();
        t.node_->shape = std::move(shape);
        t.node_->data.assign(static_cast<std::size_t>(shape_numel(t.node_->shape)), Real(0));
        t.set_requires_grad(requires_grad);
        return t;
    }

    static TensorT from_data(std::vector<int> shape, std::vector<Real> data,
                             bool requires_grad = false) {
        if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
            throw ShapeMismatch("tensor data length does not match shape " + shape_string(shape));
        }
        TensorT t;
        t.node_ = std::make_shared<TensorNode<Real>>();
        t.node_->shape = std::move(shape);
        t.node_->data = std::move(data);
        t.set_requires_grad(requires_grad);
        return t;
    }

    static TensorT scalar(Real v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->data.size()); }

    int rows() const { return node_->shape.size() == 2 ? node_->shape[0] : 0; }
    int cols() const { return node_->shape.size() == 2 ? node_->shape[1] : 0; }

    std::vector<Real>& data() { return node_->data; }
    const std::vector<Real>& data() const { return node_->data; }
    std::vector<Real>& grad() { return node_->grad; }
    const std::vector<Real>& grad() const { return node_->grad; }

    Real& at(int r, int c) { return node_->data[static_cast<std::size_t>(r) * cols() + c]; }
    Real at(int r, int c) const { return node_->data[static_cast<std::size_t>(r) * cols() + c]; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) {
        node_->requires_grad = v;
        if (v) {
            node_->grad.assign(node_->data.size(), Real(0));
        } else {
            node_->grad.clear();
        }
    }

    void zero_grad() {
        if (node_->requires_grad) node_->grad.assign(node_->data.size(), Real(0));
    }

    std::shared_ptr<TensorNode<Real>> node() const { return node_; }

    friend bool operator==(const TensorT& a, const TensorT& b) {
        return a.node_->shape == b.node_->shape && a.node_->data == b.node_->data;
    }

private:
    std::shared_ptr<TensorNode<Real>> node_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

/// Reverse-topological gradient accumulation from a scalar loss. Leaf grads
/// accumulate across calls; interior grads are recomputed fresh each call.
template <class Real>
void backward(const TensorT<Real>& loss) {
    if (loss.numel() != 1) {
        throw NotScalar("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
    }
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS over parent edges.
    std::vector<TensorNode<Real>*> order;
    std::unordered_set<TensorNode<Real>*> seen;
    std::vector<std::pair<TensorNode<Real>*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode<Real>* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // order is post-order: parents before children; walk it backwards.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (!(*it)->is_leaf()) (*it)->grad.assign((*it)->data.size(), Real(0));
    }
    TensorNode<Real>* root = loss.node().get();
    if (root->is_leaf()) {
        root->grad[0] += Real(1);
        return;
    }
    root->grad[0] = Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn();
    }
}

} // namespace blockbuild
