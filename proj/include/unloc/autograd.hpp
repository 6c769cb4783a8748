#pragma once

#include "unloc/tensor.hpp"

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace unloc {

class Var;
struct Node;
class Gradients;
Gradients backward(const Var& root, const Tensor* seed);

/// Gradient slots for the parents of one node during a backward sweep.
/// Slots are allocated (zeroed) on first touch.
class ParentGrads {
public:
    bool wants(std::size_t i) const;
    Tensor& slot(std::size_t i);
    void add(std::size_t i, const Tensor& g);

private:
    friend Gradients backward(const Var& root, const Tensor* seed);
    ParentGrads(const Node& node, std::unordered_map<const Node*, Tensor>& store) : node_(node), store_(store) {}
    const Node& node_;
    std::unordered_map<const Node*, Tensor>& store_;
};

using BackwardFn = std::function<void(const Tensor& grad_out, ParentGrads& parents)>;

struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;
};

/// Handle on a node of the computation graph. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    Index dim(int axis) const { return node_->value.dim(axis); }
    Index size() const { return node_->value.size(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }
    const Node* node() const { return node_.get(); }

    /// Builds an op node. Parents that do not require grad are kept out of the
    /// graph, and if none require grad the result is a constant.
    static Var make(Tensor value, std::vector<Var> parents, BackwardFn backward);

private:
    friend class Parameter;
    std::shared_ptr<Node> node_;
};

/// Result of a backward sweep: gradient of every leaf reached from the root.
class Gradients {
public:
    /// nullptr when `v` did not receive a gradient.
    const Tensor* of(const Var& v) const;
    const Tensor* of(const Node* n) const;

private:
    friend Gradients backward(const Var& root, const Tensor* seed);
    std::unordered_map<const Node*, Tensor> store_;
};

/// Reverse sweep from `root`. With no seed the root must hold a single scalar
/// and is seeded with 1.
Gradients backward(const Var& root, const Tensor* seed);
inline Gradients backward(const Var& root) { return backward(root, nullptr); }

/// Named learnable leaf. The graph node is long-lived so every forward pass
/// references the same value; `grad` is the accumulated gradient.
class Parameter {
public:
    Parameter() = default;
    Parameter(std::string name, Tensor value, bool trainable = true);

    const std::string& name() const { return name_; }
    const Var& var() const { return var_; }
    const Tensor& value() const { return var_.value(); }
    Tensor& mutable_value() { return var_.node_->value; }
    const Shape& shape() const { return var_.shape(); }
    bool trainable() const { return trainable_; }
    void set_trainable(bool t);

    Tensor grad;

    void zero_grad() { grad.data().setZero(); }
    /// Adds this parameter's gradient from a sweep, if it received one.
    void accumulate(const Gradients& g);

private:
    std::string name_;
    Var var_;
    bool trainable_ = true;
};

/// Non-owning list of parameters, in registration order.
using ParamList = std::vector<Parameter*>;

}  // namespace unloc
