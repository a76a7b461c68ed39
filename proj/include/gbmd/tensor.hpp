#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace gbmd {

struct TensorShape {
    std::vector<int> dims;

    std::size_t numel() const {
        std::size_t n = 1;
        for (int d : dims) n *= static_cast<std::size_t>(d);
        return n;
    }
    int rank() const { return static_cast<int>(dims.size()); }
    bool operator==(const TensorShape&) const = default;
    std::string str() const;
};

// Handle into a Tape. The shape is cached on the handle so ops can check
// conformance without touching the tape.
struct Tensor {
    int id = -1;
    TensorShape shape;
};

// Owns every node of the computation graph: values, gradients, and the
// closures that run the reverse pass. Leaves (no recorded backward fn) are
// created first and survive truncate(); intermediates are appended per
// forward pass and dropped afterwards, so parameter ids stay stable across
// training steps.
class Tape {
public:
    // Backward closure: receives the tape and the id of the node it belongs
    // to, reads that node's gradient, and accumulates into its inputs.
    using BackFn = std::function<void(Tape&, int self)>;

    Tensor leaf(TensorShape shape, std::vector<double> data, bool requires_grad);
    Tensor constant(TensorShape shape, std::vector<double> data);

    // Used by ops: appends an intermediate node. backfn is dropped when
    // requires_grad is false.
    Tensor record(TensorShape shape, std::vector<double> value, bool requires_grad,
                  BackFn backfn);

    const std::vector<double>& value(const Tensor& t) const { return value_of(t.id); }
    // In-place mutation is only allowed for leaves (parameter updates).
    std::vector<double>& leaf_value(const Tensor& t);
    const std::vector<double>& grad(const Tensor& t) const { return grad_of(t.id); }
    bool requires_grad(const Tensor& t) const { return tracks(t.id); }

    // Id-based access for backward closures.
    const std::vector<double>& value_of(int id) const;
    const std::vector<double>& grad_of(int id) const;
    std::vector<double>& grad_accum(int id);
    bool tracks(int id) const;

    // Reverse pass from a scalar. Leaf gradients accumulate across calls;
    // intermediate gradients are reset at the start of each call.
    void backward(const Tensor& loss);
    void zero_grad();

    std::size_t size() const { return nodes_.size(); }
    void truncate(std::size_t watermark);

private:
    struct Node {
        TensorShape shape;
        std::vector<double> value;
        std::vector<double> grad; // allocated only when requires_grad
        bool requires_grad = false;
        BackFn backfn; // empty for leaves
    };

    const Node& at(int id) const;
    Node& at(int id);

    std::vector<Node> nodes_;
};

} // namespace gbmd
