#include "numerics.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace codelm {

double dot(const double* a, const double* b, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols != v.size()) {
    raise(ErrorKind::invalid_argument,
          "matvec: matrix has " + std::to_string(m.cols) +
              " columns but vector has " + std::to_string(v.size()) +
              " elements");
  }
  Vector out(m.rows, 0.0);
  matvec_into(m, v.data(), out.data());
  return out;
}

void matvec_into(const Matrix& m, const double* v, double* out) {
  const double* row = m.data.data();
  for (size_t r = 0; r < m.rows; ++r, row += m.cols) {
    out[r] = dot(row, v, m.cols);
  }
}

void matvec_transposed_add(const Matrix& m, const double* v, double* out) {
  const double* row = m.data.data();
  for (size_t r = 0; r < m.rows; ++r, row += m.cols) {
    const double coeff = v[r];
    if (coeff == 0.0) continue;
    for (size_t c = 0; c < m.cols; ++c) out[c] += row[c] * coeff;
  }
}

void outer_add(Matrix& m, const double* a, const double* b) {
  double* row = m.data.data();
  for (size_t r = 0; r < m.rows; ++r, row += m.cols) {
    const double coeff = a[r];
    if (coeff == 0.0) continue;
    for (size_t c = 0; c < m.cols; ++c) row[c] += coeff * b[c];
  }
}

double sigmoid_scalar(double x) {
  // Split on sign so exp never overflows; saturates to {0, 1}.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& v) {
  Vector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = sigmoid_scalar(v[i]);
  return out;
}

Vector tanh_vec(const Vector& v) {
  Vector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

Vector softmax(const Vector& logits) {
  if (logits.empty()) {
    raise(ErrorKind::invalid_argument, "softmax: empty logits");
  }
  Vector out(logits.size());
  softmax_into(logits.data(), logits.size(), out.data());
  return out;
}

void softmax_into(const double* logits, size_t n, double* out) {
  double m = logits[0];
  for (size_t i = 1; i < n; ++i) m = std::max(m, logits[i]);
  if (!std::isfinite(m)) {
    raise(ErrorKind::numeric, "softmax: non-finite logits");
  }
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  if (!std::isfinite(sum)) {
    raise(ErrorKind::numeric, "softmax: non-finite logits");
  }
  const double inv = 1.0 / sum;
  for (size_t i = 0; i < n; ++i) out[i] *= inv;
}

double log_sum_exp(const double* logits, size_t n) {
  double m = logits[0];
  for (size_t i = 1; i < n; ++i) m = std::max(m, logits[i]);
  if (!std::isfinite(m)) {
    raise(ErrorKind::numeric, "log_sum_exp: non-finite logits");
  }
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) sum += std::exp(logits[i] - m);
  if (!std::isfinite(sum)) {
    raise(ErrorKind::numeric, "log_sum_exp: non-finite logits");
  }
  return m + std::log(sum);
}

size_t sample_categorical(const Vector& probs, SeededRng& rng) {
  if (probs.empty()) {
    raise(ErrorKind::invalid_argument, "sample_categorical: empty distribution");
  }
  double sum = 0.0;
  for (double p : probs) sum += p;
  if (std::abs(sum - 1.0) > 1e-9) {
    raise(ErrorKind::invalid_argument,
          "sample_categorical: probabilities sum to " + std::to_string(sum));
  }
  const double u = rng.next_double();
  double acc = 0.0;
  size_t last_nonzero = 0;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_nonzero = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  // Floating-point dust at the tail; settle on the last plausible outcome.
  return last_nonzero;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  const Vector& x, double h) {
  Vector grad(x.size(), 0.0);
  Vector probe = x;
  for (size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double hi = f(probe);
    probe[i] = saved - h;
    const double lo = f(probe);
    probe[i] = saved;
    grad[i] = (hi - lo) / (2.0 * h);
  }
  return grad;
}

}  // namespace codelm
