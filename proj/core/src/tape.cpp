#include "civae/tape.hpp"

#include <cmath>
#include <string>

#include "civae/errors.hpp"

namespace civae::ad {

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Const: return "const";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::MatMul: return "matmul";
        case Op::Tanh: return "tanh";
        case Op::LeakyRelu: return "leaky_relu";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Square: return "square";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::Broadcast: return "broadcast";
        case Op::Clamp: return "clamp";
        case Op::Reshape: return "reshape";
    }
    return "?";
}

namespace {
constexpr double kLeakySlope = 0.01;
}

int Tape::check(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw ConfigError("tape: variable id " + std::to_string(v.id) + " is not on this tape");
    return v.id;
}

Var Tape::push(Node n) {
    if (!n.value.finite())
        throw NumericError(std::string("tape: non-finite value produced by ") + op_name(n.op) +
                           " at node " + std::to_string(nodes_.size()));
    nodes_.push_back(std::move(n));
    has_grads_ = false;
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::require_same_shape(Var a, Var b, const char* what) const {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    if (!ta.same_shape(tb))
        throw ConfigError(std::string("tape: ") + what + " shape mismatch " + shape_str(ta.shape) +
                          " vs " + shape_str(tb.shape));
}

Var Tape::leaf(Tensor t) {
    if (!t.finite()) throw NumericError("tape: leaf input contains non-finite values");
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(t);
    return push(std::move(n));
}

Var Tape::constant(Tensor t) {
    if (!t.finite()) throw NumericError("tape: constant input contains non-finite values");
    Node n;
    n.op = Op::Const;
    n.value = std::move(t);
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    require_same_shape(a, b, "add");
    Node n;
    n.op = Op::Add;
    n.a = a.id;
    n.b = b.id;
    n.value = nodes_[a.id].value;
    const auto& rb = nodes_[b.id].value.data;
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += rb[i];
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    Node n;
    n.op = Op::Sub;
    n.a = a.id;
    n.b = b.id;
    n.value = nodes_[a.id].value;
    const auto& rb = nodes_[b.id].value.data;
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] -= rb[i];
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    Node n;
    n.op = Op::Mul;
    n.a = a.id;
    n.b = b.id;
    n.value = nodes_[a.id].value;
    const auto& rb = nodes_[b.id].value.data;
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= rb[i];
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0])
        throw ConfigError("tape: matmul shape mismatch " + shape_str(ta.shape) + " vs " +
                          shape_str(tb.shape));
    Node n;
    n.op = Op::MatMul;
    n.a = a.id;
    n.b = b.id;
    matmul_nn(ta, tb, n.value);
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    Node n;
    n.op = Op::Tanh;
    n.a = check(a);
    n.value = nodes_[a.id].value;
    for (auto& v : n.value.data) v = std::tanh(v);
    return push(std::move(n));
}

Var Tape::leaky_relu(Var a) {
    Node n;
    n.op = Op::LeakyRelu;
    n.a = check(a);
    n.value = nodes_[a.id].value;
    for (auto& v : n.value.data) v = v > 0.0 ? v : kLeakySlope * v;
    return push(std::move(n));
}

Var Tape::exp(Var a) {
    Node n;
    n.op = Op::Exp;
    n.a = check(a);
    n.value = nodes_[a.id].value;
    for (auto& v : n.value.data) v = std::exp(v);
    return push(std::move(n));
}

Var Tape::log(Var a) {
    Node n;
    n.op = Op::Log;
    n.a = check(a);
    n.value = nodes_[a.id].value;
    for (auto& v : n.value.data) v = std::log(v);
    return push(std::move(n));
}

Var Tape::square(Var a) {
    Node n;
    n.op = Op::Square;
    n.a = check(a);
    n.value = nodes_[a.id].value;
    for (auto& v : n.value.data) v = v * v;
    return push(std::move(n));
}

Var Tape::sum(Var a, int axis) {
    const Tensor& ta = nodes_[check(a)].value;
    Node n;
    n.op = Op::Sum;
    n.a = a.id;
    n.axis = axis;
    n.src_shape = ta.shape;
    if (axis == -1 || ta.rank() <= 1) {
        double acc = 0.0;
        for (double v : ta.data) acc += v;
        n.value = Tensor::scalar(acc);
        n.axis = -1;
    } else if (ta.rank() == 2 && axis == 0) {
        n.value = Tensor::zeros({ta.shape[1]});
        for (std::size_t r = 0; r < ta.shape[0]; ++r)
            for (std::size_t c = 0; c < ta.shape[1]; ++c) n.value.data[c] += ta.at(r, c);
    } else if (ta.rank() == 2 && axis == 1) {
        n.value = Tensor::zeros({ta.shape[0]});
        for (std::size_t r = 0; r < ta.shape[0]; ++r)
            for (std::size_t c = 0; c < ta.shape[1]; ++c) n.value.data[r] += ta.at(r, c);
    } else {
        throw ConfigError("tape: sum axis " + std::to_string(axis) + " invalid for shape " +
                          shape_str(ta.shape));
    }
    return push(std::move(n));
}

Var Tape::mean(Var a, int axis) {
    const Tensor& ta = nodes_[check(a)].value;
    Var s = sum(a, axis);
    Node& sn = nodes_[s.id];
    std::size_t denom = 1;
    if (sn.axis == -1)
        denom = ta.numel();
    else if (sn.axis == 0)
        denom = ta.shape[0];
    else
        denom = ta.shape[1];
    // Rewrite the freshly pushed Sum node in place as a Mean node.
    sn.op = Op::Mean;
    if (denom == 0) throw ConfigError("tape: mean over empty tensor");
    for (auto& v : sn.value.data) v /= static_cast<double>(denom);
    if (!sn.value.finite()) throw NumericError("tape: non-finite value produced by mean");
    return s;
}

Var Tape::broadcast(Var a, std::vector<std::size_t> target) {
    const Tensor& ta = nodes_[check(a)].value;
    Node n;
    n.op = Op::Broadcast;
    n.a = a.id;
    n.src_shape = ta.shape;
    const auto bad = [&] {
        return ConfigError("tape: cannot broadcast " + shape_str(ta.shape) + " to " +
                           shape_str(target));
    };
    if (ta.rank() == 0) {
        n.value = Tensor::full(target, ta.data[0]);
    } else if (ta.rank() == 1 && target.size() == 2 && target[1] == ta.shape[0]) {
        n.value = Tensor::zeros(target);
        for (std::size_t r = 0; r < target[0]; ++r)
            for (std::size_t c = 0; c < target[1]; ++c) n.value.at(r, c) = ta.data[c];
    } else if (ta.rank() == 2 && ta.shape[1] == 1 && target.size() == 2 &&
               target[0] == ta.shape[0]) {
        n.value = Tensor::zeros(target);
        for (std::size_t r = 0; r < target[0]; ++r)
            for (std::size_t c = 0; c < target[1]; ++c) n.value.at(r, c) = ta.data[r];
    } else if (ta.rank() == 2 && ta.shape[0] == 1 && target.size() == 2 &&
               target[1] == ta.shape[1]) {
        n.value = Tensor::zeros(target);
        for (std::size_t r = 0; r < target[0]; ++r)
            for (std::size_t c = 0; c < target[1]; ++c) n.value.at(r, c) = ta.data[c];
    } else {
        throw bad();
    }
    return push(std::move(n));
}

Var Tape::clamp(Var a, double lo, double hi) {
    Node n;
    n.op = Op::Clamp;
    n.a = check(a);
    n.lo = lo;
    n.hi = hi;
    n.value = nodes_[a.id].value;
    for (auto& v : n.value.data) v = v < lo ? lo : (v > hi ? hi : v);
    return push(std::move(n));
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
    const Tensor& ta = nodes_[check(a)].value;
    if (shape_numel(shape) != ta.numel())
        throw ConfigError("tape: reshape " + shape_str(ta.shape) + " to " + shape_str(shape) +
                          " changes element count");
    Node n;
    n.op = Op::Reshape;
    n.a = a.id;
    n.src_shape = ta.shape;
    n.value = Tensor(shape, ta.data);
    return push(std::move(n));
}

void Tape::backward(Var out) {
    const int oid = check(out);
    if (nodes_[oid].value.numel() != 1)
        throw ConfigError("tape: backward requires a scalar output, got shape " +
                          shape_str(nodes_[oid].value.shape));
    grads_.assign(nodes_.size(), Tensor{});
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        grads_[i] = Tensor::zeros(nodes_[i].value.shape);
    grads_[oid].data[0] = 1.0;

    for (int i = oid; i >= 0; --i) {
        const Node& n = nodes_[i];
        const Tensor& g = grads_[i];
        switch (n.op) {
            case Op::Leaf:
            case Op::Const:
                break;
            case Op::Add: {
                auto& ga = grads_[n.a].data;
                auto& gb = grads_[n.b].data;
                for (std::size_t j = 0; j < g.data.size(); ++j) {
                    ga[j] += g.data[j];
                    gb[j] += g.data[j];
                }
                break;
            }
            case Op::Sub: {
                auto& ga = grads_[n.a].data;
                auto& gb = grads_[n.b].data;
                for (std::size_t j = 0; j < g.data.size(); ++j) {
                    ga[j] += g.data[j];
                    gb[j] -= g.data[j];
                }
                break;
            }
            case Op::Mul: {
                auto& ga = grads_[n.a].data;
                auto& gb = grads_[n.b].data;
                const auto& va = nodes_[n.a].value.data;
                const auto& vb = nodes_[n.b].value.data;
                for (std::size_t j = 0; j < g.data.size(); ++j) {
                    ga[j] += g.data[j] * vb[j];
                    gb[j] += g.data[j] * va[j];
                }
                break;
            }
            case Op::MatMul:
                matmul_nt_acc(g, nodes_[n.b].value, grads_[n.a]);
                matmul_tn_acc(nodes_[n.a].value, g, grads_[n.b]);
                break;
            case Op::Tanh: {
                auto& ga = grads_[n.a].data;
                for (std::size_t j = 0; j < g.data.size(); ++j)
                    ga[j] += g.data[j] * (1.0 - n.value.data[j] * n.value.data[j]);
                break;
            }
            case Op::LeakyRelu: {
                auto& ga = grads_[n.a].data;
                const auto& va = nodes_[n.a].value.data;
                for (std::size_t j = 0; j < g.data.size(); ++j)
                    ga[j] += g.data[j] * (va[j] > 0.0 ? 1.0 : kLeakySlope);
                break;
            }
            case Op::Exp: {
                auto& ga = grads_[n.a].data;
                for (std::size_t j = 0; j < g.data.size(); ++j)
                    ga[j] += g.data[j] * n.value.data[j];
                break;
            }
            case Op::Log: {
                auto& ga = grads_[n.a].data;
                const auto& va = nodes_[n.a].value.data;
                for (std::size_t j = 0; j < g.data.size(); ++j) ga[j] += g.data[j] / va[j];
                break;
            }
            case Op::Square: {
                auto& ga = grads_[n.a].data;
                const auto& va = nodes_[n.a].value.data;
                for (std::size_t j = 0; j < g.data.size(); ++j)
                    ga[j] += 2.0 * g.data[j] * va[j];
                break;
            }
            case Op::Sum:
            case Op::Mean: {
                auto& ga = grads_[n.a];
                const double scale =
                    n.op == Op::Sum
                        ? 1.0
                        : 1.0 / static_cast<double>(n.axis == -1
                                                        ? ga.numel()
                                                        : (n.axis == 0 ? n.src_shape[0]
                                                                       : n.src_shape[1]));
                if (n.axis == -1) {
                    const double gv = g.data[0] * scale;
                    for (auto& x : ga.data) x += gv;
                } else if (n.axis == 0) {
                    for (std::size_t r = 0; r < n.src_shape[0]; ++r)
                        for (std::size_t c = 0; c < n.src_shape[1]; ++c)
                            ga.at(r, c) += g.data[c] * scale;
                } else {
                    for (std::size_t r = 0; r < n.src_shape[0]; ++r)
                        for (std::size_t c = 0; c < n.src_shape[1]; ++c)
                            ga.at(r, c) += g.data[r] * scale;
                }
                break;
            }
            case Op::Broadcast: {
                auto& ga = grads_[n.a];
                const Tensor& tv = n.value;
                if (n.src_shape.empty()) {
                    double acc = 0.0;
                    for (double gv : g.data) acc += gv;
                    ga.data[0] += acc;
                } else if (n.src_shape.size() == 1) {
                    for (std::size_t r = 0; r < tv.shape[0]; ++r)
                        for (std::size_t c = 0; c < tv.shape[1]; ++c) ga.data[c] += g.at(r, c);
                } else if (n.src_shape[1] == 1) {
                    for (std::size_t r = 0; r < tv.shape[0]; ++r)
                        for (std::size_t c = 0; c < tv.shape[1]; ++c) ga.data[r] += g.at(r, c);
                } else {
                    for (std::size_t r = 0; r < tv.shape[0]; ++r)
                        for (std::size_t c = 0; c < tv.shape[1]; ++c) ga.data[c] += g.at(r, c);
                }
                break;
            }
            case Op::Clamp: {
                auto& ga = grads_[n.a].data;
                const auto& va = nodes_[n.a].value.data;
                for (std::size_t j = 0; j < g.data.size(); ++j)
                    if (va[j] > n.lo && va[j] < n.hi) ga[j] += g.data[j];
                break;
            }
            case Op::Reshape: {
                auto& ga = grads_[n.a].data;
                for (std::size_t j = 0; j < g.data.size(); ++j) ga[j] += g.data[j];
                break;
            }
        }
    }
    has_grads_ = true;
}

const Tensor& Tape::grad(Var v) const {
    if (!has_grads_) throw ConfigError("tape: grad() before backward()");
    return grads_[check(v)];
}

Var scale(Tape& t, Var a, double c) {
    Var cv = t.constant(c);
    return t.mul(a, t.broadcast(cv, t.value(a).shape));
}

Var add_scalar(Tape& t, Var a, double c) {
    Var cv = t.constant(c);
    return t.add(a, t.broadcast(cv, t.value(a).shape));
}

Var neg(Tape& t, Var a) { return scale(t, a, -1.0); }

Var affine(Tape& t, Var x, Var w, Var b) {
    Var xw = t.matmul(x, w);
    return t.add(xw, t.broadcast(b, t.value(xw).shape));
}

} // namespace civae::ad
