#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace civae {

/// Dense row-major tensor of 64-bit reals. Rank 0 (scalar), 1 (vector) and
/// 2 (matrix) cover everything in this codebase.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> v);
    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double v);

    std::size_t numel() const;
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    bool finite() const;
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::string shape_str(const std::vector<std::size_t>& shape);
std::size_t shape_numel(const std::vector<std::size_t>& shape);

/// out = a * b for [m,k] x [k,n]; plain kernels, cache-friendly loop order.
void matmul_nn(const Tensor& a, const Tensor& b, Tensor& out);
/// out += a * b^T for [m,n] x [k,n] -> [m,k] (gradient w.r.t. left operand).
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);
/// out += a^T * b for [m,k] x [m,n] -> [k,n] (gradient w.r.t. right operand).
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);

} // namespace civae
