#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sosd/model.hpp"
#include "sosd/spectral.hpp"
#include "sosd/telemetry.hpp"

using namespace sosd;

namespace {

ModelConfig small_config(std::uint64_t seed = 5, double sigma = 0.5) {
  ModelConfig cfg;
  cfg.n = 5;
  cfg.d = 6;
  cfg.classes = 4;
  cfg.init_sigma = sigma;
  cfg.seed = seed;
  return cfg;
}

// Textbook re-computation of the forward pass, kept deliberately separate
// from the library path.
double naive_loss(const ModelState& st, const Batch& batch) {
  const std::size_t n = batch.x.rows(), d = batch.x.cols(), C = st.w_c.cols();
  auto matmul = [](const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b) {
    std::vector<std::vector<double>> out(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t k = 0; k < b.size(); ++k)
        for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    return out;
  };
  auto to_vv = [](const DenseMatrix& m) {
    std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
  };
  auto x = to_vv(batch.x);
  auto q = matmul(x, to_vv(st.w_q));
  auto k = matmul(x, to_vv(st.w_k));
  auto v = matmul(x, to_vv(st.w_v));
  std::vector<std::vector<double>> scores(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t t = 0; t < d; ++t) scores[i][j] += q[i][t] * k[j][t];
      scores[i][j] /= std::sqrt(static_cast<double>(d));
    }
  std::vector<std::vector<double>> attn(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double mx = scores[i][0];
    for (double s : scores[i]) mx = std::max(mx, s);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(scores[i][j] - mx);
    for (std::size_t j = 0; j < n; ++j) attn[i][j] = std::exp(scores[i][j] - mx) / z;
  }
  auto h = matmul(attn, v);
  auto logits = matmul(h, to_vv(st.w_c));
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits[i][0];
    for (double s : logits[i]) mx = std::max(mx, s);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(logits[i][c] - mx);
    loss += mx + std::log(z) - logits[i][static_cast<std::size_t>(batch.labels[i])];
  }
  return loss / static_cast<double>(n);
}

}  // namespace

TEST_CASE("init_params determinism and shapes") {
  const auto cfg = small_config();
  const ModelState a = init_params(cfg);
  const ModelState b = init_params(cfg);
  CHECK(a.w_q.data() == b.w_q.data());
  CHECK(a.w_k.data() == b.w_k.data());
  CHECK(a.w_v.data() == b.w_v.data());
  CHECK(a.w_c.data() == b.w_c.data());
  CHECK(a.w_c.rows() == cfg.d);
  CHECK(a.w_c.cols() == cfg.classes);
}

TEST_CASE("init_params W_C has orthonormal columns") {
  const ModelState st = init_params(small_config(11));
  DenseMatrix gram = multiply_transpose_a(st.w_c, st.w_c);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) -= 1.0;
  CHECK(frobenius_norm(gram) < 1e-12);
}

TEST_CASE("init_params tiny sigma limit") {
  auto cfg = small_config();
  cfg.init_sigma = 1e-300;
  const ModelState st = init_params(cfg);
  for (double v : st.w_q.data()) CHECK(std::abs(v) < 1e-250);
}

TEST_CASE("init_params rejects bad configs") {
  auto cfg = small_config();
  cfg.init_sigma = 0.0;
  CHECK_THROWS_AS(init_params(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.classes = cfg.d + 1;  // orthonormal columns impossible
  CHECK_THROWS_AS(init_params(cfg), std::invalid_argument);
}

TEST_CASE("init_params Gaussian moments over pooled seeds") {
  ModelConfig cfg;
  cfg.n = 4;
  cfg.d = 64;
  cfg.classes = 4;
  cfg.init_sigma = 0.01;
  double mean = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    cfg.seed = seed;
    const ModelState st = init_params(cfg);
    for (double v : st.w_q.data()) {
      mean += v;
      sq += v * v;
      ++count;
    }
  }
  mean /= static_cast<double>(count);
  const double var = sq / static_cast<double>(count) - mean * mean;
  CHECK(std::abs(mean) < 3.0 * cfg.init_sigma / std::sqrt(static_cast<double>(count)));
  CHECK(var == doctest::Approx(cfg.init_sigma * cfg.init_sigma).epsilon(0.10));
}

TEST_CASE("gen_dataset zero noise reproduces class means") {
  const auto cfg = small_config(7);
  const Batch b = gen_dataset(cfg, 0.0, 99);
  // All tokens with the same label are identical unit vectors.
  for (std::size_t i = 0; i < cfg.n; ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < cfg.d; ++j) norm += b.x(i, j) * b.x(i, j);
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t k = i + 1; k < cfg.n; ++k) {
      if (b.labels[i] == b.labels[k]) {
        for (std::size_t j = 0; j < cfg.d; ++j) CHECK(b.x(i, j) == b.x(k, j));
      }
    }
  }
}

TEST_CASE("gen_dataset determinism and label balance") {
  const auto cfg = small_config(7);
  const Batch a = gen_dataset(cfg, 0.3, 42);
  const Batch b = gen_dataset(cfg, 0.3, 42);
  CHECK(a.x.data() == b.x.data());
  CHECK(a.labels == b.labels);

  ModelConfig big;
  big.n = 1000;
  big.d = 8;
  big.classes = 4;
  big.init_sigma = 0.1;
  big.seed = 1;
  const Batch large = gen_dataset(big, 0.3, 3);
  std::array<int, 4> counts{};
  for (int y : large.labels) counts[static_cast<std::size_t>(y)]++;
  const double expected = 1000.0 / 4.0;
  const double slack = 3.0 * std::sqrt(1000.0 * 0.25 * 0.75);
  for (int c : counts) CHECK(std::abs(c - expected) <= slack);
}

TEST_CASE("forward uniform attention when W_Q = W_K = 0") {
  const auto cfg = small_config(3);
  ModelState st = init_params(cfg);
  st.w_q = DenseMatrix(cfg.d, cfg.d);
  st.w_k = DenseMatrix(cfg.d, cfg.d);
  const Batch b = gen_dataset(cfg, 0.3, 8);
  const ForwardCache cache = forward(st, b);
  const double uniform = 1.0 / static_cast<double>(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    for (std::size_t j = 0; j < cfg.n; ++j) CHECK(cache.attention(i, j) == uniform);
  }
}

TEST_CASE("forward loss is ln C at uniform probabilities") {
  const auto cfg = small_config(3);
  ModelState st = init_params(cfg);
  st.w_v = DenseMatrix(cfg.d, cfg.d);  // V = 0 forces Z = 0
  const Batch b = gen_dataset(cfg, 0.3, 8);
  const ForwardCache cache = forward(st, b);
  CHECK(cache.loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(std::log(4.0) == doctest::Approx(1.3862943611198906).epsilon(1e-15));
}

TEST_CASE("forward row-stochastic invariants") {
  const auto cfg = small_config(21, 0.7);
  const ModelState st = init_params(cfg);
  const Batch b = gen_dataset(cfg, 0.3, 22);
  const ForwardCache cache = forward(st, b);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    double sa = 0.0, sp = 0.0;
    for (std::size_t j = 0; j < cfg.n; ++j) {
      CHECK(cache.attention(i, j) > 0.0);
      sa += cache.attention(i, j);
    }
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      CHECK(cache.probs(i, c) > 0.0);
      sp += cache.probs(i, c);
    }
    CHECK(std::abs(sa - 1.0) < 1e-12);
    CHECK(std::abs(sp - 1.0) < 1e-12);
  }
  CHECK(cache.loss >= 0.0);
}

TEST_CASE("forward matches an independent reimplementation") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto cfg = small_config(seed, 0.6);
    const ModelState st = init_params(cfg);
    const Batch b = gen_dataset(cfg, 0.4, seed + 50);
    const ForwardCache cache = forward(st, b);
    CHECK(cache.loss == doctest::Approx(naive_loss(st, b)).epsilon(1e-12));
  }
}

TEST_CASE("forward rejects shape mismatch") {
  const auto cfg = small_config();
  const ModelState st = init_params(cfg);
  Batch b = gen_dataset(cfg, 0.3, 1);
  b.x = DenseMatrix(cfg.n, cfg.d + 1);
  CHECK_THROWS_AS(forward(st, b), std::invalid_argument);
}

TEST_CASE("backward zero gradients at perfect prediction") {
  const auto cfg = small_config(9);
  const ModelState st = init_params(cfg);
  const Batch b = gen_dataset(cfg, 0.3, 10);
  ForwardCache cache = forward(st, b);
  // Force P = Y.
  cache.probs = DenseMatrix(cfg.n, cfg.classes);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    cache.probs(i, static_cast<std::size_t>(b.labels[i])) = 1.0;
  }
  const GradientSet g = backward(st, b, cache);
  for (const DenseMatrix* m : {&g.g_wq, &g.g_wk, &g.g_wv, &g.g_z, &g.g_h}) {
    for (double v : m->data()) CHECK(v == 0.0);
  }
}

TEST_CASE("backward matches central finite differences") {
  const auto cfg = small_config(31, 0.5);
  ModelState st = init_params(cfg);
  const Batch b = gen_dataset(cfg, 0.3, 32);
  const ForwardCache cache = forward(st, b);
  const GradientSet g = backward(st, b, cache);
  const double h = 1e-5;

  DenseMatrix* weights[3] = {&st.w_q, &st.w_k, &st.w_v};
  const DenseMatrix* analytic[3] = {&g.g_wq, &g.g_wk, &g.g_wv};
  for (int m = 0; m < 3; ++m) {
    double scale_m = 0.0;
    for (double v : analytic[m]->data()) scale_m = std::max(scale_m, std::abs(v));
    REQUIRE(scale_m > 0.0);
    for (std::size_t idx = 0; idx < weights[m]->size(); idx += 7) {
      const double saved = weights[m]->data()[idx];
      weights[m]->data()[idx] = saved + h;
      const double lp = forward(st, b).loss;
      weights[m]->data()[idx] = saved - h;
      const double lm = forward(st, b).loss;
      weights[m]->data()[idx] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      CHECK(std::abs(fd - analytic[m]->data()[idx]) / scale_m < 1e-6);
    }
  }
}

TEST_CASE("backward G_Z definition is stable under W_Q rescaling") {
  const auto cfg = small_config(41, 0.5);
  ModelState st = init_params(cfg);
  const Batch b = gen_dataset(cfg, 0.3, 42);
  scale_in_place(st.w_q, 3.0);
  const ForwardCache cache = forward(st, b);
  const GradientSet g = backward(st, b, cache);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      const double y = (static_cast<std::size_t>(b.labels[i]) == c) ? 1.0 : 0.0;
      const double expected = (cache.probs(i, c) - y) / static_cast<double>(cfg.n);
      CHECK(g.g_z(i, c) == doctest::Approx(expected).epsilon(1e-15));
    }
  }
}

TEST_CASE("backward rejects stale cache") {
  const auto cfg = small_config();
  const ModelState st = init_params(cfg);
  const Batch b = gen_dataset(cfg, 0.3, 2);
  ForwardCache cache = forward(st, b);
  cache.probs = DenseMatrix(cfg.n + 1, cfg.classes);
  CHECK_THROWS_AS(backward(st, b, cache), std::invalid_argument);
}

TEST_CASE("softmax rows are shift invariant") {
  std::mt19937_64 rng(55);
  DenseMatrix m(4, 4);
  for (double& v : m.data()) v = standard_normal(rng);
  DenseMatrix shifted = m;
  for (std::size_t j = 0; j < 4; ++j) shifted(2, j) += 123.456;
  softmax_rows_in_place(m);
  softmax_rows_in_place(shifted);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(m(i, j) - shifted(i, j)) < 1e-14);
    }
  }
}

TEST_CASE("softmax rows satisfy the saturation and Jacobian bounds") {
  const auto cfg = small_config(61, 1.5);
  const ModelState st = init_params(cfg);
  const Batch b = gen_dataset(cfg, 0.5, 62);
  const ForwardCache cache = forward(st, b);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    std::vector<double> row(cache.scores.row(i).begin(), cache.scores.row(i).end());
    const auto a = cache.attention.row(i);
    const double g = gap(row);
    std::size_t jstar = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[jstar]) jstar = j;
    }
    CHECK(1.0 - a[jstar] <=
          static_cast<double>(cfg.n - 1) * std::exp(-g) + 1e-12);
    double a_sq = 0.0, a_max = 0.0;
    for (double v : a) {
      a_sq += v * v;
      a_max = std::max(a_max, v);
    }
    DenseMatrix jac(cfg.n, cfg.n);
    for (std::size_t r = 0; r < cfg.n; ++r) {
      for (std::size_t c = 0; c < cfg.n; ++c) {
        jac(r, c) = (r == c ? a[r] : 0.0) - a[r] * a[c];
      }
    }
    const double spectral = matrix_norms(jac).spectral;
    CHECK(spectral <= 1.0 - a_sq + 1e-12);
    CHECK(1.0 - a_sq <= 2.0 * (1.0 - a_max) + 1e-12);
  }
}

TEST_CASE("linearized_attention zero scores") {
  const std::size_t n = 6;
  const DenseMatrix lin = linearized_attention(DenseMatrix(n, n));
  for (double v : lin.data()) CHECK(v == 1.0 / static_cast<double>(n));
}

TEST_CASE("linearized_attention rows sum to one") {
  std::mt19937_64 rng(77);
  DenseMatrix m(5, 5);
  for (double& v : m.data()) v = standard_normal(rng);
  const DenseMatrix lin = linearized_attention(m);
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) s += lin(i, j);
    CHECK(std::abs(s - 1.0) < 1e-14);
  }
}

TEST_CASE("linearized_attention second-order residual scaling") {
  std::mt19937_64 rng(88);
  for (int trial = 0; trial < 10; ++trial) {
    DenseMatrix dir(6, 6);
    for (double& v : dir.data()) v = standard_normal(rng);
    scale_in_place(dir, 1.0 / frobenius_norm(dir));
    auto residual = [&](double h) {
      DenseMatrix m = scale(dir, h);
      DenseMatrix soft = m;
      softmax_rows_in_place(soft);
      return frobenius_norm(subtract(soft, linearized_attention(m)));
    };
    const double r1 = residual(1e-2);
    const double r2 = residual(5e-3);
    CHECK(r1 / r2 >= 3.5);
  }
}
