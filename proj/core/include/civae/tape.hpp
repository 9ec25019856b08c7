#pragma once

#include <cstddef>
#include <vector>

#include "civae/tensor.hpp"

namespace civae::ad {

enum class Op {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    MatMul,
    Tanh,
    LeakyRelu,
    Exp,
    Log,
    Square,
    Sum,
    Mean,
    Broadcast,
    Clamp,
    Reshape,
};

const char* op_name(Op op);

/// Handle to a node on a tape. Cheap to copy; only meaningful together with
/// the tape that created it.
struct Var {
    int id = -1;
};

/// Define-by-run reverse-mode tape. Each operation evaluates eagerly, records
/// its parents, and rejects non-finite results immediately. Nodes are stored
/// in topological order by construction, so backward() is a single reverse
/// sweep that touches every node exactly once.
///
/// A tape is a single-threaded value: build, read, backward, discard.
class Tape {
public:
    /// Gradient-tracked input (network parameters, reparameterized draws).
    Var leaf(Tensor t);
    /// Input without gradient tracking (data, masks, frozen coefficients).
    Var constant(Tensor t);
    Var constant(double v) { return constant(Tensor::scalar(v)); }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var matmul(Var a, Var b);
    Var tanh(Var a);
    Var leaky_relu(Var a); // fixed slope 0.01
    Var exp(Var a);
    Var log(Var a);
    Var square(Var a);
    /// axis -1: reduce everything to a scalar; axis 0: collapse rows -> [C];
    /// axis 1: collapse columns -> [R].
    Var sum(Var a, int axis = -1);
    Var mean(Var a, int axis = -1);
    /// Materializing broadcast: scalar -> any, [C] -> [R,C], [R,1] -> [R,C],
    /// [1,C] -> [R,C]. Backward sums over the tiled extents.
    Var broadcast(Var a, std::vector<std::size_t> target);
    Var clamp(Var a, double lo, double hi);
    Var reshape(Var a, std::vector<std::size_t> shape);

    const Tensor& value(Var v) const { return nodes_[check(v)].value; }
    std::size_t size() const { return nodes_.size(); }

    /// Reverse sweep from a scalar output. Gradients for every node are
    /// (re)computed; leaves not reachable from `out` end up with zero.
    void backward(Var out);
    const Tensor& grad(Var v) const;

private:
    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        Tensor value;
        int axis = -1;
        double lo = 0.0;
        double hi = 0.0;
        std::vector<std::size_t> src_shape;
    };

    int check(Var v) const;
    Var push(Node n);
    void require_same_shape(Var a, Var b, const char* what) const;

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool has_grads_ = false;
};

// Conveniences composed from the primitives above.
Var scale(Tape& t, Var a, double c);
Var add_scalar(Tape& t, Var a, double c);
Var neg(Tape& t, Var a);
/// x*W + b with b broadcast over rows.
Var affine(Tape& t, Var x, Var w, Var b);

} // namespace civae::ad
