#pragma once

#include <span>
#include <vector>

#include "sosd/matrix.hpp"

namespace sosd {

/// Singular values of one matrix at one moment, sorted descending.
/// The trace-normalized form (the singular distribution) is obtained via
/// trace_normalize and is undefined when the trace is zero.
struct SpectralSnapshot {
  std::vector<double> singular_values;  // descending, >= 0
  double trace = 0.0;                   // sum of singular values

  static SpectralSnapshot from_values(std::vector<double> values);
};

struct NormBundle {
  double frobenius = 0.0;
  double nuclear = 0.0;
  double spectral = 0.0;
  double condition_number = 0.0;  // +inf when condition_finite is false
  bool condition_finite = true;
};

struct SvdResult {
  DenseMatrix u;             // rows(M) x k, orthonormal columns
  SpectralSnapshot sigma;    // k singular values, descending
  DenseMatrix v;             // cols(M) x k, orthonormal columns
};

/// One-sided Jacobi SVD with cyclic sweeps. Deterministic; rejects
/// non-finite input and reports the residual if the sweep budget is hit.
SvdResult svd(const DenseMatrix& m);

/// Singular values only (same algorithm, skips the U completion).
SpectralSnapshot singular_values(const DenseMatrix& m);

/// Distribution sigma_i / trace. Rejects zero trace.
std::vector<double> trace_normalize(const SpectralSnapshot& snapshot);

/// Frobenius distance between the two trace-normalized spectra.
double sd_variation(const SpectralSnapshot& a, const SpectralSnapshot& b);

double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const DenseMatrix& a, const DenseMatrix& b);

NormBundle matrix_norms(const DenseMatrix& m);

}  // namespace sosd
