#include "stagecost/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include "stagecost/errors.hpp"

namespace stagecost {

namespace {

int64_t shape_product(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  for (int64_t e : shape) {
    if (e <= 0) throw ValidationError("tensor extent must be positive, got " + shape_str());
  }
  if (shape_product(shape) != numel()) {
    throw ValidationError("tensor shape " + shape_str() + " does not match value count " +
                          std::to_string(numel()));
  }
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
  int64_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::row_major(int64_t rows, int64_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

int64_t Tensor::rows() const { return shape.size() == 2 ? shape[0] : 1; }

int64_t Tensor::cols() const {
  if (shape.size() == 2) return shape[1];
  if (shape.size() == 1) return shape[0];
  throw ValidationError("rank-2 access on tensor of shape " + shape_str());
}

double& Tensor::at(int64_t i, int64_t j) { return values[static_cast<size_t>(i * cols() + j)]; }

double Tensor::at(int64_t i, int64_t j) const {
  return values[static_cast<size_t>(i * cols() + j)];
}

bool Tensor::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) {
  for (double& x : values) x = v;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ValidationError("matmul dimension mismatch: " + a.shape_str() + " x " + b.shape_str());
  }
  int64_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c = Tensor::zeros({m, n});
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a.values.data() + i * k;
    double* crow = c.values.data() + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b.values.data() + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

void add_matmul_nt(Tensor& da, const Tensor& dc, const Tensor& b) {
  int64_t m = da.rows(), k = da.cols(), n = b.cols();
  for (int64_t i = 0; i < m; ++i) {
    const double* dcrow = dc.values.data() + i * n;
    double* darow = da.values.data() + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double* brow = b.values.data() + p * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
      darow[p] += acc;
    }
  }
}

void add_matmul_tn(Tensor& db, const Tensor& a, const Tensor& dc) {
  int64_t m = a.rows(), k = a.cols(), n = dc.cols();
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a.values.data() + i * k;
    const double* dcrow = dc.values.data() + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = arow[p];
      double* dbrow = db.values.data() + p * n;
      for (int64_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
    }
  }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ValidationError("max_abs_diff shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  double m = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    double d = std::abs(a.values[i] - b.values[i]);
    if (d > m) m = d;
  }
  return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  if (a.values.empty()) return true;
  return std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

}  // namespace stagecost
