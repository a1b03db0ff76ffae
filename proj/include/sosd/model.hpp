#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sosd/matrix.hpp"

namespace sosd {

struct ModelConfig {
  std::size_t n = 16;       // sequence length
  std::size_t d = 32;       // feature dimension
  std::size_t classes = 8;  // C
  double init_sigma = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Trainable {W_Q, W_K, W_V} plus the fixed projection W_C. W_C is drawn
/// once per seed with orthonormalized columns and never touched by an
/// optimizer step.
struct ModelState {
  DenseMatrix w_q;  // d x d
  DenseMatrix w_k;  // d x d
  DenseMatrix w_v;  // d x d
  DenseMatrix w_c;  // d x C, fixed
};

struct Batch {
  DenseMatrix x;               // n x d
  std::vector<int> labels;     // length n, each in [0, C)
};

struct ForwardCache {
  DenseMatrix q, k, v;    // n x d
  DenseMatrix scores;     // M = Q K^T / sqrt(d), n x n
  DenseMatrix attention;  // A = row-softmax(M), n x n
  DenseMatrix hidden;     // H = A V, n x d
  DenseMatrix logits;     // Z = H W_C, n x C
  DenseMatrix probs;      // P = row-softmax(Z), n x C
  double loss = 0.0;
};

struct GradientSet {
  DenseMatrix g_wq, g_wk, g_wv;  // d x d
  DenseMatrix g_z;               // n x C
  DenseMatrix g_h;               // n x d
  DenseMatrix g_a, g_m;          // n x n
};

ModelState init_params(const ModelConfig& config);

/// Class-conditional Gaussian tokens around random unit class means.
Batch gen_dataset(const ModelConfig& config, double noise, std::uint64_t seed);

ForwardCache forward(const ModelState& state, const Batch& batch);
GradientSet backward(const ModelState& state, const Batch& batch, const ForwardCache& cache);

/// First-order softmax expansion of the attention map around zero scores:
/// A0 + (M - rowmean(M) 1^T) / n. Rows sum to 1 identically.
DenseMatrix linearized_attention(const DenseMatrix& scores);

/// Row softmax with per-row max subtraction.
void softmax_rows_in_place(DenseMatrix& m);

double standard_normal(std::mt19937_64& rng);

}  // namespace sosd
