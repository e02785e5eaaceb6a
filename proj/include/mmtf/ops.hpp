#pragma once

#include <cstddef>
#include <vector>

#include "mmtf/tensor.hpp"

// Differentiable primitives. Binary ops require equal shapes; the only
// implicit broadcast is a scalar operand. Row-wise bias addition is explicit
// (add_row) rather than general broadcasting.
namespace mmtf::ops {

// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// [m x n] -> [n x m]
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
// Adds a length-n vector to every row of an [m x n] matrix.
Tensor add_row(const Tensor& x, const Tensor& row);

// GELU, tanh approximation:
//   0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
Tensor gelu(const Tensor& a);
Tensor tanh(const Tensor& a);

// Numerically stable (max-subtracted) softmax along `axis`.
Tensor softmax(const Tensor& t, std::size_t axis);

// Normalizes each row of [rows x d] (or a single [d] vector) to zero mean and
// unit variance, then applies gain and bias. Biased variance.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps);

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis);
// `count` consecutive entries along `axis` starting at `begin`.
Tensor slice(const Tensor& t, std::size_t axis, std::size_t begin,
             std::size_t count);
std::vector<Tensor> split(const Tensor& t, const std::vector<std::size_t>& sizes,
                          std::size_t axis);
Tensor reshape(const Tensor& t, Shape shape);

// Gathers rows of a [rows x d] table; the backward pass scatters additively.
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& rows);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);

// Mean over the batch of -log softmax(logits)[target]. Logits are [batch x K]
// or a single [K] vector.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& targets);

}  // namespace mmtf::ops
