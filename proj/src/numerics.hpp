#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "rng.hpp"

namespace codelm {

using Vector = std::vector<double>;

// Dense row-major matrix of 64-bit floats.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(size_t r, size_t c) { return data[r * cols + c]; }
  double at(size_t r, size_t c) const { return data[r * cols + c]; }
  double* row(size_t r) { return data.data() + r * cols; }
  const double* row(size_t r) const { return data.data() + r * cols; }
  size_t size() const { return data.size(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

double dot(const double* a, const double* b, size_t n);

Vector matvec(const Matrix& m, const Vector& v);

// out = M v. out must have m.rows elements; no aliasing with v.
void matvec_into(const Matrix& m, const double* v, double* out);

// out += M^T v. out must have m.cols elements.
void matvec_transposed_add(const Matrix& m, const double* v, double* out);

// m += a b^T with a over rows, b over cols.
void outer_add(Matrix& m, const double* a, const double* b);

double sigmoid_scalar(double x);
Vector sigmoid(const Vector& v);
Vector tanh_vec(const Vector& v);

// Max-subtracted softmax. Raises ErrorKind::numeric on non-finite input.
Vector softmax(const Vector& logits);
void softmax_into(const double* logits, size_t n, double* out);

// log(sum(exp(logits))), max-subtracted.
double log_sum_exp(const double* logits, size_t n);

// Index i with probability probs[i]. probs must sum to 1 within 1e-9.
size_t sample_categorical(const Vector& probs, SeededRng& rng);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  const Vector& x, double h = 1e-5);

}  // namespace codelm
