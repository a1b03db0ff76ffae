#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sosd/model.hpp"
#include "sosd/spectral.hpp"

using namespace sosd;

namespace {

DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c,
                          double scale = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = scale * standard_normal(rng);
  return m;
}

double reconstruction_error(const DenseMatrix& m, const SvdResult& res) {
  DenseMatrix approx(m.rows(), m.cols());
  const std::size_t k = res.sigma.singular_values.size();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        s += res.u(i, t) * res.sigma.singular_values[t] * res.v(j, t);
      }
      approx(i, j) = s;
    }
  }
  return frobenius_norm(subtract(approx, m));
}

double orthonormality_error(const DenseMatrix& u) {
  DenseMatrix gram = multiply_transpose_a(u, u);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) -= 1.0;
  return frobenius_norm(gram);
}

}  // namespace

TEST_CASE("svd identity") {
  const auto res = svd(DenseMatrix::identity(3));
  REQUIRE(res.sigma.singular_values.size() == 3);
  for (double s : res.sigma.singular_values) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd diagonal with negative entry") {
  const auto res = svd(DenseMatrix{{-2.0, 0.0}, {0.0, 1.0}});
  CHECK(res.sigma.singular_values[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(res.sigma.singular_values[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd rank-1 all-ones block") {
  const DenseMatrix m{{1.0, 1.0}, {1.0, 1.0}};
  const auto res = svd(m);
  CHECK(res.sigma.singular_values[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(res.sigma.singular_values[1]) < 1e-12);
  CHECK(orthonormality_error(res.u) < 1e-9);
  CHECK(orthonormality_error(res.v) < 1e-9);
  CHECK(reconstruction_error(m, res) < 1e-9);
}

TEST_CASE("svd rejects non-finite input") {
  DenseMatrix m(2, 2);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(svd(m), std::invalid_argument);
}

TEST_CASE("svd random shapes: factorization contract") {
  std::mt19937_64 rng(7);
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{5, 5}, {8, 3}, {3, 8}, {16, 16},
                      {1, 4}, {4, 1}}) {
    for (double scale : {1.0, 1e-6, 1e4}) {
      const DenseMatrix m = random_matrix(rng, r, c, scale);
      const auto res = svd(m);
      CHECK(res.sigma.singular_values.size() == std::min(r, c));
      for (std::size_t i = 0; i + 1 < res.sigma.singular_values.size(); ++i) {
        CHECK(res.sigma.singular_values[i] >= res.sigma.singular_values[i + 1]);
      }
      CHECK(orthonormality_error(res.u) < 1e-9);
      CHECK(orthonormality_error(res.v) < 1e-9);
      CHECK(reconstruction_error(m, res) < 1e-9 * std::max(1.0, frobenius_norm(m)));
    }
  }
}

TEST_CASE("svd orthogonal invariance of the spectrum") {
  std::mt19937_64 rng(11);
  const DenseMatrix m = random_matrix(rng, 6, 6);
  const DenseMatrix rot = svd(random_matrix(rng, 6, 6)).u;  // orthogonal factor
  const auto sa = singular_values(m).singular_values;
  const auto sb = singular_values(multiply(rot, m)).singular_values;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i] == doctest::Approx(sb[i]).epsilon(1e-9));
  }
}

TEST_CASE("svd zero matrix completes an orthonormal basis") {
  const auto res = svd(DenseMatrix(3, 2));
  CHECK(res.sigma.trace == 0.0);
  CHECK(orthonormality_error(res.u) < 1e-12);
  CHECK(orthonormality_error(res.v) < 1e-12);
}

TEST_CASE("trace_normalize basics") {
  const auto snap = SpectralSnapshot::from_values({2.0, 1.0, 1.0});
  const auto dist = trace_normalize(snap);
  CHECK(dist[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(dist[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(dist[2] == doctest::Approx(0.25).epsilon(1e-15));

  const auto uniform = trace_normalize(SpectralSnapshot::from_values({1, 1, 1, 1, 1}));
  for (double v : uniform) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));

  double sum = 0.0;
  for (double v : dist) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("trace_normalize scale invariance and zero rejection") {
  const auto a = trace_normalize(SpectralSnapshot::from_values({3.0, 1.0}));
  const auto b = trace_normalize(SpectralSnapshot::from_values({6.0, 2.0}));
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-15));
  CHECK(a[0] == doctest::Approx(0.75).epsilon(1e-15));

  CHECK_THROWS_AS(trace_normalize(SpectralSnapshot::from_values({0.0, 0.0})),
                  std::invalid_argument);
}

TEST_CASE("sd_variation identities") {
  const auto snap = singular_values(DenseMatrix{{1.0, 2.0}, {0.5, -1.0}});
  CHECK(sd_variation(snap, snap) == 0.0);

  std::mt19937_64 rng(3);
  const DenseMatrix w = random_matrix(rng, 5, 5);
  const auto s1 = singular_values(w);
  const auto s3 = singular_values(scale(w, 3.0));
  CHECK(sd_variation(s1, s3) < 1e-12);
}

TEST_CASE("sd_variation hand value and errors") {
  const auto a = singular_values(DenseMatrix{{3.0, 0.0}, {0.0, 1.0}});
  const auto b = singular_values(DenseMatrix{{1.0, 0.0}, {0.0, 1.0}});
  CHECK(sd_variation(a, b) == doctest::Approx(std::sqrt(0.125)).epsilon(1e-12));

  CHECK_THROWS_AS(sd_variation(a, SpectralSnapshot::from_values({1.0, 1.0, 1.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(sd_variation(a, SpectralSnapshot::from_values({0.0, 0.0})),
                  std::invalid_argument);
}

TEST_CASE("cosine_similarity") {
  const DenseMatrix a{{1.0, 2.0}, {3.0, 4.0}};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(a, scale(a, 2.5)) == doctest::Approx(1.0).epsilon(1e-14));

  const DenseMatrix e1{{1.0, 0.0}, {0.0, 0.0}};
  const DenseMatrix e2{{0.0, 0.0}, {0.0, 1.0}};
  CHECK(cosine_similarity(e1, e2) == doctest::Approx(0.0));

  const std::vector<double> s1{3.0, 1.0}, s2{1.0, 1.0};
  CHECK(cosine_similarity(std::span<const double>(s1), std::span<const double>(s2)) ==
        doctest::Approx(4.0 / std::sqrt(20.0)).epsilon(1e-12));

  CHECK_THROWS_AS(cosine_similarity(a, DenseMatrix(2, 2)), std::invalid_argument);
}

TEST_CASE("matrix_norms hand values") {
  const auto nb = matrix_norms(DenseMatrix{{3.0, 0.0}, {0.0, 4.0}});
  CHECK(nb.frobenius == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(nb.nuclear == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(nb.spectral == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(nb.condition_finite);
  CHECK(nb.condition_number == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

  const auto id = matrix_norms(DenseMatrix::identity(6));
  CHECK(id.frobenius == doctest::Approx(std::sqrt(6.0)).epsilon(1e-12));
  CHECK(id.nuclear == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(id.spectral == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.condition_number == doctest::Approx(1.0).epsilon(1e-12));

  const auto deg = matrix_norms(DenseMatrix{{1.0, 1.0}, {1.0, 1.0}});
  CHECK_FALSE(deg.condition_finite);
  CHECK(std::isinf(deg.condition_number));
}

TEST_CASE("norm ordering invariants on random matrices") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = 2 + static_cast<std::size_t>(rng() % 7);
    const std::size_t c = 2 + static_cast<std::size_t>(rng() % 7);
    const DenseMatrix m = random_matrix(rng, r, c);
    const auto nb = matrix_norms(m);
    CHECK(nb.spectral <= nb.frobenius * (1 + 1e-12));
    CHECK(nb.frobenius <= nb.nuclear * (1 + 1e-12));
    const auto sv = singular_values(m).singular_values;
    std::size_t rank = 0;
    for (double s : sv) {
      if (s > 1e-12 * sv.front()) ++rank;
    }
    CHECK(nb.nuclear <= std::sqrt(static_cast<double>(rank)) * nb.frobenius * (1 + 1e-12));
  }
}

TEST_CASE("Mirsky and von Neumann on random pairs") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 2 + static_cast<std::size_t>(rng() % 7);
    const std::size_t c = 2 + static_cast<std::size_t>(rng() % 7);
    const DenseMatrix a = random_matrix(rng, r, c);
    const DenseMatrix b = random_matrix(rng, r, c);
    const auto sa = singular_values(a).singular_values;
    const auto sb = singular_values(b).singular_values;
    double diff_sq = 0.0, product = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
      diff_sq += (sa[i] - sb[i]) * (sa[i] - sb[i]);
      product += sa[i] * sb[i];
    }
    CHECK(std::sqrt(diff_sq) <= frobenius_norm(subtract(a, b)) + 1e-9);
    CHECK(dot_flat(a, b) <= product + 1e-9);
  }
}

TEST_CASE("normalized spectrum is Lipschitz along gradient steps") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(rng() % 10);
    const DenseMatrix w = random_matrix(rng, d, d);
    const DenseMatrix g = random_matrix(rng, d, d);
    const double eta = 0.05;
    DenseMatrix w2 = w;
    add_scaled_in_place(w2, g, -eta);
    const auto s1 = singular_values(w);
    const auto s2 = singular_values(w2);
    if (!(s1.trace > 0.0) || !(s2.trace > 0.0)) continue;
    const double lhs = sd_variation(s1, s2);
    const double rhs = (1.0 + std::sqrt(static_cast<double>(d))) /
                       std::min(s1.trace, s2.trace) * eta * frobenius_norm(g);
    CHECK(lhs <= rhs + 1e-9);
  }
}
