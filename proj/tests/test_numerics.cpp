#include <cmath>

#include <doctest.h>

#include "error.hpp"
#include "numerics.hpp"

using namespace codelm;

TEST_SUITE_BEGIN("numerics");

TEST_CASE("matvec identity and annihilator") {
  Matrix id(2, 2);
  id.at(0, 0) = 1.0;
  id.at(1, 1) = 1.0;
  CHECK(matvec(id, {3.0, 4.0}) == Vector{3.0, 4.0});

  Matrix zero(3, 2);
  CHECK(matvec(zero, {5.0, -7.0}) == Vector{0.0, 0.0, 0.0});
}

TEST_CASE("matvec hand-computed product") {
  // [[1,2],[3,4]] * (1,1) = (1+2, 3+4) = (3, 7)
  Matrix m(2, 2);
  m.at(0, 0) = 1.0;
  m.at(0, 1) = 2.0;
  m.at(1, 0) = 3.0;
  m.at(1, 1) = 4.0;
  CHECK(matvec(m, {1.0, 1.0}) == Vector{3.0, 7.0});
}

TEST_CASE("matvec rejects dimension mismatch") {
  Matrix m(2, 3);
  CHECK_THROWS_AS(matvec(m, {1.0, 2.0}), Error);
}

TEST_CASE("matvec linearity") {
  SeededRng rng(7);
  Matrix m(5, 4);
  for (double& v : m.data) v = rng.next_uniform(-2.0, 2.0);
  Vector u(4), v(4);
  for (double& x : u) x = rng.next_uniform(-1.0, 1.0);
  for (double& x : v) x = rng.next_uniform(-1.0, 1.0);
  const double a = 1.75, b = -0.5;

  Vector combo(4);
  for (size_t i = 0; i < 4; ++i) combo[i] = a * u[i] + b * v[i];
  const Vector lhs = matvec(m, combo);
  const Vector mu = matvec(m, u), mv = matvec(m, v);
  for (size_t i = 0; i < 5; ++i) {
    CHECK(lhs[i] == doctest::Approx(a * mu[i] + b * mv[i]).epsilon(1e-10));
  }
}

TEST_CASE("matvec_transposed_add and outer_add agree with direct loops") {
  SeededRng rng(11);
  Matrix m(3, 4);
  for (double& v : m.data) v = rng.next_uniform(-1.0, 1.0);
  Vector a(3), b(4);
  for (double& x : a) x = rng.next_uniform(-1.0, 1.0);
  for (double& x : b) x = rng.next_uniform(-1.0, 1.0);

  Vector got(4, 0.0);
  matvec_transposed_add(m, a.data(), got.data());
  for (size_t c = 0; c < 4; ++c) {
    double want = 0.0;
    for (size_t r = 0; r < 3; ++r) want += m.at(r, c) * a[r];
    CHECK(got[c] == doctest::Approx(want).epsilon(1e-12));
  }

  Matrix acc(3, 4);
  outer_add(acc, a.data(), b.data());
  for (size_t r = 0; r < 3; ++r) {
    for (size_t c = 0; c < 4; ++c) {
      CHECK(acc.at(r, c) == doctest::Approx(a[r] * b[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("sigmoid and tanh fixed points") {
  CHECK(sigmoid({0.0})[0] == doctest::Approx(0.5));
  CHECK(tanh_vec({0.0})[0] == 0.0);
}

TEST_CASE("sigmoid symmetry identity") {
  SeededRng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.next_uniform(-30.0, 30.0);
    const double sum = sigmoid_scalar(x) + sigmoid_scalar(-x);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("activations saturate without NaN") {
  for (double x : {-1e6, -750.0, 750.0, 1e6, 1e300, -1e300}) {
    CHECK(std::isfinite(sigmoid_scalar(x)));
    CHECK(std::isfinite(std::tanh(x)));
  }
  CHECK(sigmoid_scalar(1e300) == 1.0);
  CHECK(sigmoid_scalar(-1e300) == 0.0);
}

TEST_CASE("softmax uniform logits") {
  const Vector p = softmax({0.0, 0.0, 0.0});
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax closed form (ln 2, 0)") {
  // exp(ln 2) = 2, so probabilities are (2/3, 1/3).
  const Vector p = softmax({std::log(2.0), 0.0});
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax shift invariance") {
  SeededRng rng(5);
  Vector z(6);
  for (double& v : z) v = rng.next_uniform(-4.0, 4.0);
  Vector shifted = z;
  for (double& v : shifted) v += 123.456;
  const Vector p = softmax(z), q = softmax(shifted);
  for (size_t i = 0; i < z.size(); ++i) {
    CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
  }
}

TEST_CASE("softmax is a probability vector even for huge logits") {
  SeededRng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Vector z(8);
    for (double& v : z) v = rng.next_uniform(-1e3, 1e3);
    const Vector p = softmax(z);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(std::isfinite(v));
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("softmax rejects non-finite logits") {
  CHECK_THROWS_AS(softmax({1.0, std::nan("")}), Error);
}

TEST_CASE("sample_categorical degenerate distributions") {
  SeededRng rng(1);
  for (int i = 0; i < 10; ++i) {
    CHECK(sample_categorical({1.0}, rng) == 0);
    CHECK(sample_categorical({0.0, 1.0}, rng) == 1);
  }
}

TEST_CASE("sample_categorical rejects unnormalized input") {
  SeededRng rng(1);
  CHECK_THROWS_AS(sample_categorical({0.5, 0.4}, rng), Error);
}

TEST_CASE("sample_categorical empirical frequencies within 3 sigma") {
  // Binomial oracle: per outcome, |freq - p| <= 3 sqrt(p (1-p) / n).
  const Vector probs = {0.5, 0.3, 0.2};
  const int n = 100000;
  SeededRng rng(12345);
  std::vector<int> hits(probs.size(), 0);
  for (int i = 0; i < n; ++i) ++hits[sample_categorical(probs, rng)];
  for (size_t i = 0; i < probs.size(); ++i) {
    const double freq = static_cast<double>(hits[i]) / n;
    const double sigma = std::sqrt(probs[i] * (1.0 - probs[i]) / n);
    CHECK(std::abs(freq - probs[i]) <= 3.0 * sigma);
  }
}

TEST_CASE("finite differences: quadratic") {
  auto f = [](const Vector& x) { return x[0] * x[0]; };
  const Vector g = finite_difference_gradient(f, {3.0});
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("finite differences: constant function") {
  auto f = [](const Vector&) { return 42.0; };
  const Vector g = finite_difference_gradient(f, {1.0, -2.0, 3.0});
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("finite differences: sum of sines matches analytic cosine") {
  SeededRng rng(21);
  Vector x(5);
  for (double& v : x) v = rng.next_uniform(-2.0, 2.0);
  auto f = [](const Vector& v) {
    double s = 0.0;
    for (double xi : v) s += std::sin(xi);
    return s;
  };
  const Vector g = finite_difference_gradient(f, x);
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(g[i] == doctest::Approx(std::cos(x[i])).epsilon(1e-8));
  }
}

TEST_CASE("seeded rng reproducibility over a million draws") {
  SeededRng a(987654321), b(987654321);
  for (int i = 0; i < 1000000; ++i) {
    if (a.next_u64() != b.next_u64()) {
      FAIL("draw sequences diverged at index ", i);
    }
  }
}

TEST_CASE("seeded rng derived draws stay in range") {
  SeededRng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const double d = rng.next_double();
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
    const size_t idx = rng.next_index(7);
    CHECK(idx < 7);
  }
}

TEST_SUITE_END();
