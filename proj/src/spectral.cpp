#include "sosd/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sosd {

namespace {

constexpr double kJacobiTol = 1e-12;  // relative off-diagonal threshold
constexpr int kMaxSweeps = 60;

// Orthogonalizes the columns of a (m x n, m >= n is not required) in place,
// accumulating the right-hand rotations into v (n x n, starts as identity).
// Returns false if the sweep budget was exhausted, with *residual set to the
// worst relative off-diagonal seen in the last sweep.
bool jacobi_orthogonalize(DenseMatrix& a, DenseMatrix& v, double* residual) {
  const std::size_t m = a.rows(), n = a.cols();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    double worst = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double gpp = 0.0, gqq = 0.0, gpq = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          const double ap = a(k, p), aq = a(k, q);
          gpp += ap * ap;
          gqq += aq * aq;
          gpq += ap * aq;
        }
        const double thresh = kJacobiTol * std::sqrt(gpp * gqq);
        if (std::abs(gpq) <= thresh) continue;
        if (thresh > 0.0) worst = std::max(worst, std::abs(gpq) / std::sqrt(gpp * gqq));
        rotated = true;

        const double tau = (gqq - gpp) / (2.0 * gpq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;

        for (std::size_t k = 0; k < m; ++k) {
          const double ap = a(k, p), aq = a(k, q);
          a(k, p) = c * ap - s * aq;
          a(k, q) = s * ap + c * aq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vp = v(k, p), vq = v(k, q);
          v(k, p) = c * vp - s * vq;
          v(k, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return true;
    *residual = worst;
  }
  return false;
}

// Deterministic orthonormal completion: replaces column j of u with a unit
// vector orthogonal to all other columns, built from the first canonical
// basis vector that leaves a sizable residual.
void complete_column(DenseMatrix& u, std::size_t j, std::size_t k_total) {
  const std::size_t m = u.rows();
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<double> cand(m, 0.0);
    cand[e] = 1.0;
    for (std::size_t c = 0; c < k_total; ++c) {
      if (c == j) continue;
      double proj = 0.0;
      for (std::size_t k = 0; k < m; ++k) proj += cand[k] * u(k, c);
      for (std::size_t k = 0; k < m; ++k) cand[k] -= proj * u(k, c);
    }
    double norm = 0.0;
    for (double x : cand) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.5) {
      for (std::size_t k = 0; k < m; ++k) u(k, j) = cand[k] / norm;
      return;
    }
  }
  throw std::runtime_error("svd: failed to complete orthonormal basis");
}

SvdResult svd_tall(const DenseMatrix& m_in) {
  // Expects rows >= cols; works on the columns directly.
  DenseMatrix a = m_in;
  const std::size_t n = a.cols();
  DenseMatrix v = DenseMatrix::identity(n);
  double residual = 0.0;
  if (!jacobi_orthogonalize(a, v, &residual)) {
    std::ostringstream msg;
    msg << "svd: Jacobi sweeps did not converge within " << kMaxSweeps
        << " sweeps (residual " << residual << ")";
    throw std::runtime_error(msg.str());
  }

  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.rows(); ++k) s += a(k, j) * a(k, j);
    sv[j] = std::sqrt(s);
  }

  // Stable descending order keeps ties in Jacobi output order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return sv[i] > sv[j]; });

  SvdResult out;
  out.u = DenseMatrix(a.rows(), n);
  out.v = DenseMatrix(n, n);
  out.sigma.singular_values.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.sigma.singular_values[j] = sv[src];
    for (std::size_t k = 0; k < a.rows(); ++k) out.u(k, j) = a(k, src);
    for (std::size_t k = 0; k < n; ++k) out.v(k, j) = v(k, src);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double s = out.sigma.singular_values[j];
    if (s > 0.0) {
      for (std::size_t k = 0; k < out.u.rows(); ++k) out.u(k, j) /= s;
    } else {
      complete_column(out.u, j, n);
    }
  }
  out.sigma.trace = std::accumulate(out.sigma.singular_values.begin(),
                                    out.sigma.singular_values.end(), 0.0);
  return out;
}

}  // namespace

SpectralSnapshot SpectralSnapshot::from_values(std::vector<double> values) {
  SpectralSnapshot snap;
  snap.singular_values = std::move(values);
  std::stable_sort(snap.singular_values.begin(), snap.singular_values.end(),
                   std::greater<double>());
  snap.trace = std::accumulate(snap.singular_values.begin(),
                               snap.singular_values.end(), 0.0);
  return snap;
}

SvdResult svd(const DenseMatrix& m) {
  if (!m.is_finite()) throw std::invalid_argument("svd: non-finite input");
  if (m.rows() >= m.cols()) return svd_tall(m);
  SvdResult t = svd_tall(transpose(m));
  SvdResult out;
  out.u = std::move(t.v);
  out.v = std::move(t.u);
  out.sigma = std::move(t.sigma);
  return out;
}

SpectralSnapshot singular_values(const DenseMatrix& m) {
  return svd(m).sigma;
}

std::vector<double> trace_normalize(const SpectralSnapshot& snapshot) {
  if (!(snapshot.trace > 0.0)) {
    throw std::invalid_argument("trace_normalize: zero trace (degenerate snapshot)");
  }
  std::vector<double> dist(snapshot.singular_values.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    dist[i] = snapshot.singular_values[i] / snapshot.trace;
  }
  return dist;
}

double sd_variation(const SpectralSnapshot& a, const SpectralSnapshot& b) {
  if (a.singular_values.size() != b.singular_values.size()) {
    throw std::invalid_argument("sd_variation: spectrum lengths differ");
  }
  const std::vector<double> da = trace_normalize(a);
  const std::vector<double> db = trace_normalize(b);
  double s = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double diff = da[i] - db[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_similarity: length mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw std::invalid_argument("cosine_similarity: zero operand has no direction");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine_similarity(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("cosine_similarity: shape mismatch");
  }
  return cosine_similarity(std::span<const double>(a.data()),
                           std::span<const double>(b.data()));
}

NormBundle matrix_norms(const DenseMatrix& m) {
  if (!m.is_finite()) throw std::invalid_argument("matrix_norms: non-finite input");
  const SpectralSnapshot snap = singular_values(m);
  NormBundle out;
  double sq = 0.0;
  for (double s : snap.singular_values) sq += s * s;
  out.frobenius = std::sqrt(sq);
  out.nuclear = snap.trace;
  out.spectral = snap.singular_values.front();
  const double smin = snap.singular_values.back();
  const double smax = out.spectral;
  if (smin > 1e-14 * smax && smin > 0.0) {
    out.condition_number = smax / smin;
    out.condition_finite = true;
  } else {
    out.condition_number = std::numeric_limits<double>::infinity();
    out.condition_finite = false;
  }
  return out;
}

}  // namespace sosd
