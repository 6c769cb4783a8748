#include "unloc/autograd.hpp"

#include <unordered_set>

namespace unloc {

bool ParentGrads::wants(std::size_t i) const {
    return i < node_.parents.size() && node_.parents[i] && node_.parents[i]->requires_grad;
}

Tensor& ParentGrads::slot(std::size_t i) {
    const Node* p = node_.parents.at(i).get();
    auto it = store_.find(p);
    if (it == store_.end()) it = store_.emplace(p, Tensor::zeros(p->value.shape())).first;
    return it->second;
}

void ParentGrads::add(std::size_t i, const Tensor& g) {
    if (!wants(i)) return;
    const Node* p = node_.parents[i].get();
    if (g.size() != p->value.size())
        throw DimensionError("gradient shape " + shape_str(g.shape()) + " does not match value shape " +
                             shape_str(p->value.shape()));
    auto it = store_.find(p);
    if (it == store_.end())
        store_.emplace(p, Tensor(p->value.shape(), g.data()));
    else
        it->second.data() += g.data();
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var Var::make(Tensor value, std::vector<Var> parents, BackwardFn backward) {
    Var out(std::move(value), false);
    bool any = false;
    for (const Var& p : parents) any = any || p.requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(parents.size());
    // Constant parents stay as null slots so parent indices remain stable.
    for (Var& p : parents) out.node_->parents.push_back(p.requires_grad() ? std::move(p.node_) : nullptr);
    out.node_->backward = std::move(backward);
    return out;
}

const Tensor* Gradients::of(const Var& v) const { return of(v.node()); }

const Tensor* Gradients::of(const Node* n) const {
    auto it = store_.find(n);
    return it == store_.end() ? nullptr : &it->second;
}

Gradients backward(const Var& root, const Tensor* seed) {
    Gradients out;
    if (!root.requires_grad()) return out;

    // Iterative post-order DFS; `order` ends up with parents before children.
    std::vector<const Node*> order;
    std::unordered_set<const Node*> seen;
    std::vector<std::pair<const Node*, std::size_t>> stack{{root.node(), 0}};
    seen.insert(root.node());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            const Node* p = n->parents[next++].get();
            if (p && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    if (seed) {
        if (seed->size() != root.size()) throw DimensionError("backward seed does not match root shape");
        out.store_.emplace(root.node(), Tensor(root.shape(), seed->data()));
    } else {
        if (root.size() != 1) throw DimensionError("backward without seed needs a scalar root");
        out.store_.emplace(root.node(), Tensor::ones(root.shape()));
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const Node* n = *it;
        if (!n->backward) continue;
        auto g = out.store_.find(n);
        if (g == out.store_.end()) continue;
        // Interior gradients are consumed here; only leaves stay in the store.
        const Tensor grad_out = std::move(g->second);
        out.store_.erase(g);
        ParentGrads pg(*n, out.store_);
        n->backward(grad_out, pg);
    }
    return out;
}

Parameter::Parameter(std::string name, Tensor value, bool trainable)
    : grad(Tensor::zeros(value.shape())), name_(std::move(name)), var_(std::move(value), trainable),
      trainable_(trainable) {}

void Parameter::set_trainable(bool t) {
    trainable_ = t;
    var_.node_->requires_grad = t;
}

void Parameter::accumulate(const Gradients& g) {
    if (const Tensor* t = g.of(var_)) grad.data() += t->data();
}

}  // namespace unloc
