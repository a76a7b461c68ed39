#include "gbmd/tensor.hpp"

#include <algorithm>
#include <stdexcept>

#include "gbmd/errors.hpp"

namespace gbmd {

std::string TensorShape::str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

Tensor Tape::leaf(TensorShape shape, std::vector<double> data, bool requires_grad) {
    if (data.size() != shape.numel()) {
        throw ShapeError("tape leaf: data length " + std::to_string(data.size()) +
                         " does not match shape " + shape.str());
    }
    Node n;
    n.shape = shape;
    n.value = std::move(data);
    n.requires_grad = requires_grad;
    if (requires_grad) n.grad.assign(n.value.size(), 0.0);
    nodes_.push_back(std::move(n));
    return Tensor{static_cast<int>(nodes_.size()) - 1, std::move(shape)};
}

Tensor Tape::constant(TensorShape shape, std::vector<double> data) {
    return leaf(std::move(shape), std::move(data), false);
}

Tensor Tape::record(TensorShape shape, std::vector<double> value, bool requires_grad,
                    BackFn backfn) {
    if (value.size() != shape.numel()) {
        throw ShapeError("tape record: value length does not match shape " + shape.str());
    }
    Node n;
    n.shape = shape;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) {
        n.grad.assign(n.value.size(), 0.0);
        n.backfn = std::move(backfn);
    }
    nodes_.push_back(std::move(n));
    return Tensor{static_cast<int>(nodes_.size()) - 1, std::move(shape)};
}

const Tape::Node& Tape::at(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) {
        throw std::out_of_range("tape: tensor id " + std::to_string(id) + " is not live");
    }
    return nodes_[static_cast<std::size_t>(id)];
}

Tape::Node& Tape::at(int id) {
    return const_cast<Node&>(static_cast<const Tape*>(this)->at(id));
}

std::vector<double>& Tape::leaf_value(const Tensor& t) {
    Node& n = at(t.id);
    if (n.backfn) {
        throw ContractError("tape: in-place mutation is restricted to leaves");
    }
    return n.value;
}

const std::vector<double>& Tape::value_of(int id) const { return at(id).value; }

const std::vector<double>& Tape::grad_of(int id) const {
    const Node& n = at(id);
    if (!n.requires_grad) {
        throw ContractError("tape: tensor does not track gradients");
    }
    return n.grad;
}

std::vector<double>& Tape::grad_accum(int id) {
    Node& n = at(id);
    if (!n.requires_grad) {
        throw ContractError("tape: tensor does not track gradients");
    }
    return n.grad;
}

bool Tape::tracks(int id) const { return at(id).requires_grad; }

void Tape::backward(const Tensor& loss) {
    const Node& top = at(loss.id);
    if (top.shape.numel() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + top.shape.str());
    }
    if (!top.requires_grad) {
        throw ContractError("backward: loss does not depend on any tracked tensor");
    }
    // Intermediates restart from zero each pass; leaf grads are left alone so
    // successive backward calls accumulate into them.
    for (Node& n : nodes_) {
        if (n.requires_grad && n.backfn) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    }
    at(loss.id).grad[0] += 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.backfn) n.backfn(*this, i);
    }
}

void Tape::zero_grad() {
    for (Node& n : nodes_) {
        if (n.requires_grad) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    }
}

void Tape::truncate(std::size_t watermark) {
    if (watermark > nodes_.size()) {
        throw ContractError("tape truncate: watermark beyond live nodes");
    }
    nodes_.resize(watermark);
}

} // namespace gbmd
