#include "sosd/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "sosd/model.hpp"
#include "sosd/spectral.hpp"
#include "sosd/telemetry.hpp"

namespace sosd {

namespace {

constexpr double kSlackTol = 1e-9;

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  std::seed_seq seq{seed, trial, stream};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

std::size_t uniform_dim(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> dist(lo, hi);
  return dist(rng);
}

// Gaussian matrix rescaled to a log-uniform Frobenius target in [1e-3, 1e3].
DenseMatrix random_scaled_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = standard_normal(rng);
  const double target = std::exp(uniform(rng, std::log(1e-3), std::log(1e3)));
  const double norm = frobenius_norm(m);
  if (norm > 0.0) scale_in_place(m, target / norm);
  return m;
}

std::vector<double> softmax_vec(const std::vector<double>& u) {
  std::vector<double> s(u.size());
  double mx = u[0];
  for (double v : u) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    s[i] = std::exp(u[i] - mx);
    sum += s[i];
  }
  for (double& v : s) v /= sum;
  return s;
}

struct SlackTracker {
  std::size_t violations = 0;
  double worst_slack = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();

  void record(double slack) {
    min_margin = std::min(min_margin, slack);
    if (slack < -kSlackTol) {
      ++violations;
      worst_slack = std::min(worst_slack, slack);
    }
  }
};

void run_l1(std::mt19937_64& rng, std::size_t dim_min, std::size_t dim_max, SlackTracker& t) {
  const std::size_t n = uniform_dim(rng, dim_min, dim_max);
  std::vector<double> a(n), b(n);
  const double sa = std::exp(uniform(rng, std::log(1e-3), std::log(1e3)));
  const double sb = std::exp(uniform(rng, std::log(1e-3), std::log(1e3)));
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = std::abs(standard_normal(rng)) * sa;
    b[i] = std::abs(standard_normal(rng)) * sb;
  }
  double alpha = 0.0, beta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    alpha += a[i];
    beta += b[i];
  }
  if (alpha == 0.0 || beta == 0.0 || alpha == beta) return;  // statement excludes alpha == beta
  double lhs_sq = 0.0, diff_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d1 = a[i] / alpha - b[i] / beta;
    const double d2 = a[i] - b[i];
    lhs_sq += d1 * d1;
    diff_sq += d2 * d2;
  }
  const double rhs =
      (1.0 + std::sqrt(static_cast<double>(n))) / std::min(alpha, beta) * std::sqrt(diff_sq);
  t.record(rhs - std::sqrt(lhs_sq));
}

void run_l2(std::mt19937_64& rng, std::size_t dim_min, std::size_t dim_max, SlackTracker& t) {
  const std::size_t m = uniform_dim(rng, dim_min, dim_max);
  const std::size_t n = uniform_dim(rng, dim_min, dim_max);
  const DenseMatrix wa = random_scaled_matrix(rng, m, n);
  const DenseMatrix wb = random_scaled_matrix(rng, m, n);
  const auto sa = singular_values(wa).singular_values;
  const auto sb = singular_values(wb).singular_values;
  double diff_sq = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = sa[i] - sb[i];
    diff_sq += d * d;
  }
  t.record(frobenius_norm(subtract(wb, wa)) - std::sqrt(diff_sq));
}

void run_l3(std::mt19937_64& rng, std::size_t dim_min, std::size_t dim_max, SlackTracker& t) {
  const std::size_t m = uniform_dim(rng, dim_min, dim_max);
  const std::size_t n = uniform_dim(rng, dim_min, dim_max);
  const DenseMatrix a = random_scaled_matrix(rng, m, n);
  const DenseMatrix b = random_scaled_matrix(rng, m, n);
  const auto sa = singular_values(a).singular_values;
  const auto sb = singular_values(b).singular_values;
  double rhs = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) rhs += sa[i] * sb[i];
  t.record(rhs - dot_flat(a, b));  // tr(A^T B) = <A, B>
}

void run_l4(std::mt19937_64& rng, std::size_t dim_min, std::size_t dim_max, SlackTracker& t) {
  const std::size_t d = uniform_dim(rng, dim_min, dim_max);
  const DenseMatrix w = random_scaled_matrix(rng, d, d);
  const DenseMatrix g = random_scaled_matrix(rng, d, d);
  const double eta = std::exp(uniform(rng, std::log(1e-4), 0.0));
  DenseMatrix w_next = w;
  add_scaled_in_place(w_next, g, -eta);
  const auto snap_a = singular_values(w);
  const auto snap_b = singular_values(w_next);
  if (!(snap_a.trace > 0.0) || !(snap_b.trace > 0.0)) return;
  const double lhs = sd_variation(snap_a, snap_b);
  const double rhs = (1.0 + std::sqrt(static_cast<double>(d))) /
                     std::min(snap_a.trace, snap_b.trace) * eta * frobenius_norm(g);
  t.record(rhs - lhs);
}

void run_l6(std::mt19937_64& rng, std::size_t dim_min, std::size_t dim_max, SlackTracker& t) {
  const std::size_t m = uniform_dim(rng, dim_min, dim_max);
  std::vector<double> u(m);
  const double scl = std::exp(uniform(rng, std::log(1e-2), std::log(10.0)));
  for (double& v : u) v = standard_normal(rng) * scl;
  const auto s = softmax_vec(u);
  std::size_t jstar = 0;
  for (std::size_t j = 1; j < m; ++j) {
    if (u[j] > u[jstar]) jstar = j;
  }
  const double g = gap(u);
  const double bound = std::exp(-g);
  t.record(static_cast<double>(m - 1) * bound - (1.0 - s[jstar]));
  for (std::size_t j = 0; j < m; ++j) {
    if (j != jstar) t.record(bound - s[j]);
  }
}

void run_l7(std::mt19937_64& rng, std::size_t dim_min, std::size_t dim_max, SlackTracker& t) {
  const std::size_t m = uniform_dim(rng, dim_min, dim_max);
  std::vector<double> u(m);
  const double scl = std::exp(uniform(rng, std::log(1e-2), std::log(10.0)));
  for (double& v : u) v = standard_normal(rng) * scl;
  const auto a = softmax_vec(u);

  DenseMatrix jac(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      jac(i, j) = (i == j ? a[i] : 0.0) - a[i] * a[j];
    }
  }
  double a_sq = 0.0, a_max = 0.0;
  for (double v : a) {
    a_sq += v * v;
    a_max = std::max(a_max, v);
  }
  const double spectral = matrix_norms(jac).spectral;
  t.record((1.0 - a_sq) - spectral);
  t.record(2.0 * (1.0 - a_max) - (1.0 - a_sq));
  // Positive semidefiniteness probed on random directions.
  for (int probe = 0; probe < 4; ++probe) {
    std::vector<double> x(m);
    double xn = 0.0;
    for (double& v : x) {
      v = standard_normal(rng);
      xn += v * v;
    }
    double quad = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) quad += x[i] * jac(i, j) * x[j];
    }
    t.record(quad / xn);
  }
}

void run_l8(std::mt19937_64& rng, std::size_t dim_min, std::size_t dim_max, SlackTracker& t) {
  const std::size_t n = uniform_dim(rng, std::max<std::size_t>(2, dim_min), dim_max);
  DenseMatrix direction(n, n);
  for (double& v : direction.data()) v = standard_normal(rng);
  const double nrm = frobenius_norm(direction);
  if (nrm == 0.0) return;
  scale_in_place(direction, 1.0 / nrm);

  auto residual = [&](double h) {
    DenseMatrix m = scale(direction, h);
    DenseMatrix soft = m;
    softmax_rows_in_place(soft);
    return frobenius_norm(subtract(soft, linearized_attention(m)));
  };
  const double h = 1e-2;
  const double r1 = residual(h);
  const double r2 = residual(h / 2.0);
  if (r2 == 0.0) return;  // linearization exact; order test vacuous
  t.record(r1 / r2 - 3.5);
}

}  // namespace

SuiteReport check_inequality_suite(Lemma lemma, std::size_t trials, std::uint64_t seed,
                                   std::size_t dim_min, std::size_t dim_max) {
  if (trials < 1) throw std::invalid_argument("check_inequality_suite: trials >= 1");
  if (dim_min < 2 || dim_max < dim_min) {
    throw std::invalid_argument("check_inequality_suite: invalid dim range");
  }
  SlackTracker tracker;
  const std::uint64_t stream = static_cast<std::uint64_t>(lemma);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    auto rng = trial_rng(seed, trial, stream);
    switch (lemma) {
      case Lemma::kL1: run_l1(rng, dim_min, dim_max, tracker); break;
      case Lemma::kL2: run_l2(rng, dim_min, dim_max, tracker); break;
      case Lemma::kL3: run_l3(rng, dim_min, dim_max, tracker); break;
      case Lemma::kL4: run_l4(rng, dim_min, dim_max, tracker); break;
      case Lemma::kL6: run_l6(rng, dim_min, dim_max, tracker); break;
      case Lemma::kL7: run_l7(rng, dim_min, dim_max, tracker); break;
      case Lemma::kL8: run_l8(rng, dim_min, dim_max, tracker); break;
    }
  }
  SuiteReport report;
  report.name = to_string(lemma);
  report.seed = seed;
  report.trials = trials;
  report.violations = tracker.violations;
  report.worst_slack = tracker.worst_slack;
  report.min_margin = tracker.min_margin;
  report.dim_min = dim_min;
  report.dim_max = dim_max;
  return report;
}

SuiteReport check_descent_lemma(double beta, double eta, std::size_t trials,
                                std::uint64_t seed) {
  if (!(beta > 0.0)) throw std::invalid_argument("check_descent_lemma: beta > 0");
  if (!(eta > 0.0 && eta <= 2.0 / beta)) {
    throw std::invalid_argument("check_descent_lemma: 0 < eta <= 2/beta required");
  }
  SlackTracker tracker;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    auto rng = trial_rng(seed, trial, 100);
    const std::size_t dim = uniform_dim(rng, 1, 8);
    double w_sq = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double w = standard_normal(rng);
      w_sq += w * w;
    }
    const double grad_sq = beta * beta * w_sq;
    const double shrink = 1.0 - eta * beta;
    const double loss_drop = 0.5 * beta * w_sq * (1.0 - shrink * shrink);
    const double lower = eta * (1.0 - eta * beta / 2.0) * grad_sq;
    const double upper = eta * (1.0 + eta * beta / 2.0) * grad_sq;
    tracker.record(loss_drop - lower);
    tracker.record(upper - loss_drop);
  }
  SuiteReport report;
  report.name = "L5";
  report.seed = seed;
  report.trials = trials;
  report.violations = tracker.violations;
  report.worst_slack = tracker.worst_slack;
  report.min_margin = tracker.min_margin;
  report.dim_min = 1;
  report.dim_max = 8;
  return report;
}

std::vector<GradcheckConfig> default_gradcheck_configs(std::size_t count, std::uint64_t seed) {
  std::vector<GradcheckConfig> configs;
  configs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = trial_rng(seed, i, 200);
    GradcheckConfig cfg{};
    cfg.n = uniform_dim(rng, 2, 8);
    cfg.d = uniform_dim(rng, 2, 8);
    cfg.classes = uniform_dim(rng, 2, std::min<std::size_t>(cfg.d, 5));
    cfg.sigma = uniform(rng, 0.3, 0.8);
    cfg.noise = 0.3;
    cfg.seed = seed * 1000 + i;
    configs.push_back(cfg);
  }
  return configs;
}

GradcheckReport finite_diff_gradcheck(const std::vector<GradcheckConfig>& configs) {
  GradcheckReport report;
  const double h = 1e-5;
  for (const auto& cfg : configs) {
    ModelConfig mc;
    mc.n = cfg.n;
    mc.d = cfg.d;
    mc.classes = cfg.classes;
    mc.init_sigma = cfg.sigma;
    mc.seed = cfg.seed;
    ModelState state = init_params(mc);
    const Batch batch = gen_dataset(mc, cfg.noise, cfg.seed + 1);
    const ForwardCache cache = forward(state, batch);
    const GradientSet grads = backward(state, batch, cache);

    DenseMatrix* weights[3] = {&state.w_q, &state.w_k, &state.w_v};
    const DenseMatrix* analytic[3] = {&grads.g_wq, &grads.g_wk, &grads.g_wv};
    for (int m = 0; m < 3; ++m) {
      DenseMatrix& w = *weights[m];
      DenseMatrix fd(w.rows(), w.cols());
      for (std::size_t idx = 0; idx < w.size(); ++idx) {
        const double saved = w.data()[idx];
        w.data()[idx] = saved + h;
        const double lp = forward(state, batch).loss;
        w.data()[idx] = saved - h;
        const double lm = forward(state, batch).loss;
        w.data()[idx] = saved;
        fd.data()[idx] = (lp - lm) / (2.0 * h);
      }
      double scale_m = 0.0;
      for (std::size_t idx = 0; idx < fd.size(); ++idx) {
        scale_m = std::max({scale_m, std::abs(fd.data()[idx]),
                            std::abs(analytic[m]->data()[idx])});
      }
      if (scale_m == 0.0) continue;  // identically zero gradient: exact match
      for (std::size_t idx = 0; idx < fd.size(); ++idx) {
        const double err = std::abs(fd.data()[idx] - analytic[m]->data()[idx]) / scale_m;
        report.worst_rel_error = std::max(report.worst_rel_error, err);
      }
    }
    ++report.configs;
  }
  return report;
}

double check_phase1_bound(double d, double eta, double big_d) {
  if (!(d > 0.0) || !(eta > 0.0) || big_d < 0.0) {
    throw std::invalid_argument("check_phase1_bound: positive arguments required");
  }
  return 3.0 * big_d * big_d * eta / (2.0 * (1.0 + std::sqrt(d)));
}

std::optional<double> fit_phase2_exponent(
    const std::vector<std::pair<double, double>>& pairs) {
  std::vector<std::pair<double, double>> usable;
  for (const auto& [ds, dl] : pairs) {
    if (ds > 0.0 && dl > 0.0) usable.emplace_back(std::log(ds), std::log(dl));
  }
  if (usable.size() < 5) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : usable) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(usable.size());
  my /= static_cast<double>(usable.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : usable) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  return sxy / sxx;
}

Lemma lemma_from_string(const std::string& s) {
  if (s == "L1") return Lemma::kL1;
  if (s == "L2") return Lemma::kL2;
  if (s == "L3") return Lemma::kL3;
  if (s == "L4") return Lemma::kL4;
  if (s == "L6") return Lemma::kL6;
  if (s == "L7") return Lemma::kL7;
  if (s == "L8") return Lemma::kL8;
  throw std::invalid_argument("unknown lemma: " + s);
}

std::string to_string(Lemma lemma) {
  switch (lemma) {
    case Lemma::kL1: return "L1";
    case Lemma::kL2: return "L2";
    case Lemma::kL3: return "L3";
    case Lemma::kL4: return "L4";
    case Lemma::kL6: return "L6";
    case Lemma::kL7: return "L7";
    case Lemma::kL8: return "L8";
  }
  return "?";
}

}  // namespace sosd
