#include "sosd/model.hpp"

#include <cmath>
#include <stdexcept>

namespace sosd {

void ModelConfig::validate() const {
  if (n < 2) throw std::invalid_argument("ModelConfig: n >= 2 required");
  if (d < 2) throw std::invalid_argument("ModelConfig: d >= 2 required");
  if (classes < 2) throw std::invalid_argument("ModelConfig: C >= 2 required");
  if (classes > d) {
    throw std::invalid_argument("ModelConfig: C <= d required for orthonormal W_C columns");
  }
  if (!(init_sigma > 0.0)) throw std::invalid_argument("ModelConfig: init_sigma > 0 required");
}

double standard_normal(std::mt19937_64& rng) {
  // Fresh distribution per call: no hidden cache, so the value is a pure
  // function of the engine state.
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

namespace {

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, double sigma,
                            std::mt19937_64& rng) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = sigma * standard_normal(rng);
  return m;
}

// Gram-Schmidt on the columns.
void orthonormalize_columns(DenseMatrix& m) {
  const std::size_t rows = m.rows(), cols = m.cols();
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t c = 0; c < j; ++c) {
      double proj = 0.0;
      for (std::size_t k = 0; k < rows; ++k) proj += m(k, j) * m(k, c);
      for (std::size_t k = 0; k < rows; ++k) m(k, j) -= proj * m(k, c);
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < rows; ++k) norm += m(k, j) * m(k, j);
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      throw std::runtime_error("init_params: degenerate draw for W_C columns");
    }
    for (std::size_t k = 0; k < rows; ++k) m(k, j) /= norm;
  }
}

}  // namespace

ModelState init_params(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  ModelState state;
  state.w_q = gaussian_matrix(config.d, config.d, config.init_sigma, rng);
  state.w_k = gaussian_matrix(config.d, config.d, config.init_sigma, rng);
  state.w_v = gaussian_matrix(config.d, config.d, config.init_sigma, rng);
  state.w_c = gaussian_matrix(config.d, config.classes, 1.0, rng);
  orthonormalize_columns(state.w_c);
  return state;
}

Batch gen_dataset(const ModelConfig& config, double noise, std::uint64_t seed) {
  config.validate();
  if (noise < 0.0) throw std::invalid_argument("gen_dataset: noise >= 0 required");
  std::mt19937_64 rng(seed);

  // Unit class means, then labels, then token noise; draw order is fixed so
  // identical seeds reproduce identical batches.
  DenseMatrix means(config.classes, config.d);
  for (std::size_t c = 0; c < config.classes; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < config.d; ++j) {
      means(c, j) = standard_normal(rng);
      norm += means(c, j) * means(c, j);
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < config.d; ++j) means(c, j) /= norm;
  }

  Batch batch;
  batch.labels.resize(config.n);
  std::uniform_int_distribution<int> label_dist(0, static_cast<int>(config.classes) - 1);
  for (std::size_t i = 0; i < config.n; ++i) batch.labels[i] = label_dist(rng);

  batch.x = DenseMatrix(config.n, config.d);
  for (std::size_t i = 0; i < config.n; ++i) {
    const int y = batch.labels[i];
    for (std::size_t j = 0; j < config.d; ++j) {
      batch.x(i, j) = means(static_cast<std::size_t>(y), j) + noise * standard_normal(rng);
    }
  }
  return batch;
}

void softmax_rows_in_place(DenseMatrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

ForwardCache forward(const ModelState& state, const Batch& batch) {
  const std::size_t n = batch.x.rows();
  const std::size_t d = batch.x.cols();
  if (state.w_q.rows() != d || state.w_q.cols() != d || !state.w_q.same_shape(state.w_k) ||
      !state.w_q.same_shape(state.w_v) || state.w_c.rows() != d) {
    throw std::invalid_argument("forward: state/batch shapes inconsistent");
  }
  if (batch.labels.size() != n) {
    throw std::invalid_argument("forward: label count != sequence length");
  }
  const std::size_t classes = state.w_c.cols();
  for (int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("forward: label out of range");
    }
  }

  ForwardCache cache;
  cache.q = multiply(batch.x, state.w_q);
  cache.k = multiply(batch.x, state.w_k);
  cache.v = multiply(batch.x, state.w_v);
  cache.scores = multiply_transpose_b(cache.q, cache.k);
  scale_in_place(cache.scores, 1.0 / std::sqrt(static_cast<double>(d)));
  cache.attention = cache.scores;
  softmax_rows_in_place(cache.attention);
  cache.hidden = multiply(cache.attention, cache.v);
  cache.logits = multiply(cache.hidden, state.w_c);
  cache.probs = cache.logits;
  softmax_rows_in_place(cache.probs);

  // Loss via per-row log-sum-exp; matches -mean log P[i, y_i].
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = cache.logits.row(i);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    loss += mx + std::log(sum) - row[static_cast<std::size_t>(batch.labels[i])];
  }
  cache.loss = loss / static_cast<double>(n);
  return cache;
}

GradientSet backward(const ModelState& state, const Batch& batch, const ForwardCache& cache) {
  const std::size_t n = batch.x.rows();
  const std::size_t d = batch.x.cols();
  const std::size_t classes = state.w_c.cols();
  if (cache.probs.rows() != n || cache.probs.cols() != classes ||
      cache.attention.rows() != n || cache.attention.cols() != n) {
    throw std::invalid_argument("backward: cache does not match state/batch");
  }
  if (!cache.probs.is_finite() || !cache.attention.is_finite()) {
    throw std::invalid_argument("backward: cache holds non-finite values");
  }

  GradientSet g;
  g.g_z = cache.probs;
  for (std::size_t i = 0; i < n; ++i) {
    g.g_z(i, static_cast<std::size_t>(batch.labels[i])) -= 1.0;
  }
  scale_in_place(g.g_z, 1.0 / static_cast<double>(n));

  g.g_h = multiply_transpose_b(g.g_z, state.w_c);
  g.g_a = multiply_transpose_b(g.g_h, cache.v);

  // Per-row softmax Jacobian: G_M[i] = (diag(a) - a a^T) G_A[i].
  g.g_m = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto a = cache.attention.row(i);
    auto ga = g.g_a.row(i);
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) inner += a[j] * ga[j];
    for (std::size_t j = 0; j < n; ++j) g.g_m(i, j) = a[j] * (ga[j] - inner);
  }

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  g.g_wq = multiply_transpose_a(batch.x, multiply(g.g_m, cache.k));
  scale_in_place(g.g_wq, inv_sqrt_d);
  g.g_wk = multiply_transpose_a(batch.x, multiply(transpose(g.g_m), cache.q));
  scale_in_place(g.g_wk, inv_sqrt_d);
  g.g_wv = multiply_transpose_a(batch.x, multiply_transpose_a(cache.attention, g.g_h));
  return g;
}

DenseMatrix linearized_attention(const DenseMatrix& scores) {
  if (!scores.is_finite()) throw std::invalid_argument("linearized_attention: non-finite input");
  if (scores.rows() != scores.cols()) {
    throw std::invalid_argument("linearized_attention: square score matrix expected");
  }
  const std::size_t n = scores.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += scores(i, j);
    mean *= inv_n;
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = inv_n + inv_n * (scores(i, j) - mean);
    }
  }
  return out;
}

}  // namespace sosd
