#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace stagecost {

/// Dense row-major array of 64-bit floats. The sole value carrier for
/// states, predictions, parameters and gradients.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<int64_t> s, std::vector<double> v);

  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor scalar(double v);
  static Tensor row_major(int64_t rows, int64_t cols, std::vector<double> v);

  int64_t numel() const { return static_cast<int64_t>(values.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape.size()); }

  // Rank-2 accessors; rank-1 tensors behave as a single row.
  int64_t rows() const;
  int64_t cols() const;
  double& at(int64_t i, int64_t j);
  double at(int64_t i, int64_t j) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  void fill(double v);

  std::string shape_str() const;
};

/// C = A·B for rank-2 row-major operands. Per-element accumulation runs in
/// ascending inner-index order; every matmul in the library, taped or not,
/// goes through this kernel so equal inputs give bitwise-equal products.
Tensor matmul(const Tensor& a, const Tensor& b);

/// dA += dC·Bᵀ and dB += Aᵀ·dC, the two accumulation forms backprop needs.
void add_matmul_nt(Tensor& da, const Tensor& dc, const Tensor& b);
void add_matmul_tn(Tensor& db, const Tensor& a, const Tensor& dc);

/// Max over elements of |a - b|. Shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Byte-level equality of shape and payload. Stricter than ==: distinguishes
/// -0.0 from +0.0 and matches identical NaN patterns.
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace stagecost
