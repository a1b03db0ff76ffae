#include "sosd/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sosd/verification.hpp"

namespace sosd {

double gap(std::span<const double> u) {
  if (u.size() < 2) throw std::invalid_argument("gap: need at least two entries");
  double best = -std::numeric_limits<double>::infinity();
  double second = -std::numeric_limits<double>::infinity();
  for (double v : u) {
    if (v > best) {
      second = best;
      best = v;
    } else if (v > second) {
      second = v;
    }
  }
  return best - second;
}

std::pair<double, double> margins_with_norms(const ForwardCache& cache,
                                             std::span<const int> labels, double nuc_q,
                                             double nuc_k, double nuc_v) {
  if (!(nuc_q > 0.0 && nuc_k > 0.0 && nuc_v > 0.0)) {
    throw std::invalid_argument("margins: zero nuclear norm");
  }
  const std::size_t n = cache.scores.rows();
  const double score_scale = 1.0 / (nuc_q * nuc_k);
  double gamma_min = std::numeric_limits<double>::infinity();
  std::vector<double> scaled(cache.scores.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto row = cache.scores.row(i);
    for (std::size_t j = 0; j < scaled.size(); ++j) scaled[j] = row[j] * score_scale;
    gamma_min = std::min(gamma_min, gap(scaled));
  }

  double omega_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    auto row = cache.logits.row(i);
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    double rival = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c != y) rival = std::max(rival, row[c]);
    }
    omega_min = std::min(omega_min, (row[y] - rival) / nuc_v);
  }
  return {gamma_min, omega_min};
}

std::pair<double, double> margins(const ModelState& state, const ForwardCache& cache,
                                  std::span<const int> labels) {
  const double nuc_q = matrix_norms(state.w_q).nuclear;
  const double nuc_k = matrix_norms(state.w_k).nuclear;
  const double nuc_v = matrix_norms(state.w_v).nuclear;
  return margins_with_norms(cache, labels, nuc_q, nuc_k, nuc_v);
}

double estimate_beta(std::span<const double> theta_prev, std::span<const double> theta_next,
                     std::span<const double> grad_prev, std::span<const double> grad_next) {
  if (theta_prev.size() != theta_next.size() || grad_prev.size() != grad_next.size() ||
      theta_prev.size() != grad_prev.size()) {
    throw std::invalid_argument("estimate_beta: length mismatch");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < theta_prev.size(); ++i) {
    const double dg = grad_next[i] - grad_prev[i];
    const double dw = theta_next[i] - theta_prev[i];
    num += dg * dg;
    den += dw * dw;
  }
  if (!(den > 0.0)) throw std::invalid_argument("estimate_beta: zero parameter displacement");
  return std::sqrt(num) / std::sqrt(den);
}

double estimate_beta(const ModelState& prev_state, const ModelState& next_state,
                     const GradientSet& prev_grads, const GradientSet& next_grads) {
  auto concat = [](const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c) {
    std::vector<double> out;
    out.reserve(a.size() + b.size() + c.size());
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    out.insert(out.end(), c.data().begin(), c.data().end());
    return out;
  };
  const auto tp = concat(prev_state.w_q, prev_state.w_k, prev_state.w_v);
  const auto tn = concat(next_state.w_q, next_state.w_k, next_state.w_v);
  const auto gp = concat(prev_grads.g_wq, prev_grads.g_wk, prev_grads.g_wv);
  const auto gn = concat(next_grads.g_wq, next_grads.g_wk, next_grads.g_wv);
  return estimate_beta(tp, tn, gp, gn);
}

double stability_bound(double d, double eta, double g, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("stability_bound: tau > 0 required");
  return (1.0 + std::sqrt(d)) * eta * g / tau;
}

ThresholdConstants predict_thresholds(ThresholdConstants c) {
  if (!(c.epsilon_v > 0.0 && c.epsilon_q > 0.0 && c.c_v > 0.0 && c.c_m > 0.0 &&
        c.v0 > 0.0 && c.q0 > 0.0 && c.g_max > 0.0 && c.d > 0.0 && c.eta > 0.0)) {
    throw std::invalid_argument("predict_thresholds: all constants must be positive");
  }
  const double sqrt_d = std::sqrt(c.d);
  const double numer = (1.0 + sqrt_d) * c.eta * c.g_max - c.epsilon_v * c.v0;
  c.t_v = std::max(0.0, numer / (c.epsilon_v * c.c_v * sqrt_d));

  c.c_0 = c.c_m * c.v0;
  const double lambda = std::log(1.0 + sqrt_d) - std::log(c.epsilon_q * c.q0 * sqrt_d);
  if (lambda <= 0.0) {
    c.qk_bound_at_init = true;
    c.t_qk = 0.0;
  } else {
    c.qk_bound_at_init = false;
    c.t_qk = std::sqrt(c.c_0 * c.c_0 + 2.0 * c.c_0 * lambda * c.eta * c.g_max);
  }

  const double branch_v = (1.0 + sqrt_d) * c.eta * c.g_max / (c.epsilon_v * c.c_v * sqrt_d);
  const double branch_qk =
      std::sqrt(std::max(0.0, c.c_0 * c.c_0 + 2.0 * c.c_0 * lambda * c.eta * c.g_max));
  c.t_star = c.scale_c * std::max(branch_v, branch_qk);
  return c;
}

std::optional<std::size_t> detect_sosd_onset(std::span<const double> sd_trace, double eps,
                                             std::size_t window) {
  if (sd_trace.empty()) throw std::invalid_argument("detect_sosd_onset: empty trace");
  if (window < 1) throw std::invalid_argument("detect_sosd_onset: window >= 1 required");
  std::size_t run = 0;
  for (std::size_t t = 0; t < sd_trace.size(); ++t) {
    if (std::isfinite(sd_trace[t]) && sd_trace[t] < eps) {
      if (++run >= window) return t - window + 1;
    } else {
      run = 0;
    }
  }
  return std::nullopt;
}

AssumptionReport assumption_monitor(const std::vector<MetricsRecord>& trace) {
  if (trace.size() < 2) throw std::invalid_argument("assumption_monitor: trace too short");
  AssumptionReport report;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& rec = trace[t];
    for (int m = 0; m < 3; ++m) {
      report.max_condition[m] = std::max(report.max_condition[m], rec.matrices[m].cond);
      report.g_max = std::max(report.g_max, rec.matrices[m].grad_norm);
      if (t > 0 && rec.matrices[m].fro_norm < trace[t - 1].matrices[m].fro_norm) {
        if (report.norm_decrease_steps.empty() ||
            report.norm_decrease_steps.back() != rec.step) {
          report.norm_decrease_steps.push_back(rec.step);
        }
      }
    }
    if (std::isfinite(rec.g_h_norm) && rec.g_h_norm < 1e-12) report.g_h_vanished = true;
  }
  return report;
}

OnsetScan scan_onsets(const std::vector<MetricsRecord>& trace, double model_dim,
                      double base_lr, std::size_t window) {
  if (trace.empty()) throw std::invalid_argument("scan_onsets: empty trace");
  OnsetScan scan;
  for (int m = 0; m < 3; ++m) {
    std::vector<double> sd;
    sd.reserve(trace.size());
    double g_run = 0.0;
    std::size_t peak = 0;
    double peak_val = -1.0;
    for (std::size_t t = 0; t < trace.size(); ++t) {
      const auto& pm = trace[t].matrices[m];
      g_run = std::max(g_run, pm.grad_norm);
      sd.push_back(pm.sd_var);
      if (std::isfinite(pm.sd_var) && pm.sd_var > peak_val) {
        peak_val = pm.sd_var;
        peak = t;
      }
    }
    const double tau_final = trace.back().matrices[m].nuc_norm;
    scan.epsilon[m] = stability_bound(model_dim, base_lr, g_run, tau_final);
    scan.peak_step[m] = peak;
    std::span<const double> tail(sd.data() + peak, sd.size() - peak);
    auto rel = detect_sosd_onset(tail, scan.epsilon[m], window);
    if (rel) scan.onset[m] = peak + *rel;
  }
  return scan;
}

namespace {

// First step from which the beta estimate stays within 2x of its trailing
// median for `hold` consecutive steps.
std::optional<std::size_t> beta_threshold_estimate(const std::vector<double>& betas,
                                                   std::size_t hold) {
  if (betas.size() < 2 * hold) return std::nullopt;
  std::vector<char> ok(betas.size(), 0);
  std::vector<double> win;
  for (std::size_t s = hold; s < betas.size(); ++s) {
    if (!std::isfinite(betas[s])) continue;
    win.clear();
    for (std::size_t k = s - hold; k < s; ++k) {
      if (std::isfinite(betas[k])) win.push_back(betas[k]);
    }
    if (win.size() < hold / 2) continue;
    std::nth_element(win.begin(), win.begin() + win.size() / 2, win.end());
    const double med = win[win.size() / 2];
    ok[s] = (betas[s] >= 0.5 * med && betas[s] <= 2.0 * med) ? 1 : 0;
  }
  std::size_t run = 0;
  for (std::size_t s = hold; s < betas.size(); ++s) {
    run = ok[s] ? run + 1 : 0;
    if (run >= hold) return s - hold + 1;
  }
  return std::nullopt;
}

}  // namespace

PhaseReport phase_report(const std::vector<MetricsRecord>& trace, const OnsetScan& onsets,
                         double model_dim, double base_lr) {
  if (trace.size() < 2) throw std::invalid_argument("phase_report: trace too short");
  PhaseReport report;
  report.sosd_onset = onsets.onset;
  report.onset_epsilon = onsets.epsilon;

  std::optional<std::size_t> earliest, latest;
  for (const auto& o : onsets.onset) {
    if (!o) continue;
    if (!earliest || *o < *earliest) earliest = *o;
    if (!latest || *o > *latest) latest = *o;
  }
  if (!earliest) return report;  // no matrix ever settled: phases undefined

  const std::size_t t_s = *latest;
  report.phase2_start = t_s;
  const std::size_t last = trace.size() - 1;  // loss decrement defined for t < last
  auto dl = [&](std::size_t t) { return trace[t].loss - trace[t + 1].loss; };

  if (*earliest > 0) {
    const std::size_t t_f = *earliest - 1;
    report.phase1_end = t_f;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t <= t_f && t < last; ++t) {
      sum += dl(t);
      ++count;
    }
    if (count > 0) report.phase1_mean_dl = sum / static_cast<double>(count);

    double d_est = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t <= t_f; ++t) {
      double best = 0.0;
      for (int m = 0; m < 3; ++m) {
        const auto& pm = trace[t].matrices[m];
        if (std::isfinite(pm.sd_var)) best = std::max(best, pm.nuc_norm * pm.sd_var);
      }
      d_est = std::min(d_est, best);
    }
    if (std::isfinite(d_est)) {
      report.d_estimate = d_est;
      report.phase1_bound = check_phase1_bound(model_dim, base_lr, d_est);
      report.phase1_bound_eta_free =
          3.0 * d_est * d_est / (2.0 * (1.0 + std::sqrt(model_dim)));
    }
  }

  if (t_s + 1 < last) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = t_s + 1; t < last; ++t) {
      sum += dl(t);
      ++count;
    }
    if (count > 0) report.phase2_mean_dl = sum / static_cast<double>(count);
  }

  // Phase-II log-log fit of the loss decrement against the largest per-step
  // SD variation across the trainables.
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t t = t_s + 1; t < last; ++t) {
    double ds = 0.0;
    for (int m = 0; m < 3; ++m) {
      const double v = trace[t].matrices[m].sd_var;
      if (std::isfinite(v)) ds = std::max(ds, v);
    }
    const double drop = dl(t);
    if (ds > 0.0 && drop > 0.0) pairs.emplace_back(ds, drop);
  }
  auto fit = fit_phase2_exponent(pairs);
  report.p_hat_available = fit.has_value();
  if (fit) report.p_hat = *fit;

  std::vector<double> betas;
  betas.reserve(trace.size());
  for (const auto& rec : trace) betas.push_back(rec.beta_est);
  report.beta_threshold = beta_threshold_estimate(betas, 100);
  return report;
}

ThresholdConstants measure_threshold_constants(const std::vector<MetricsRecord>& trace,
                                               double model_dim, double seq_len,
                                               double base_lr, double gh0,
                                               double lambda_min_x) {
  if (trace.empty()) throw std::invalid_argument("measure_threshold_constants: empty trace");
  ThresholdConstants c;
  c.d = model_dim;
  c.eta = base_lr;
  double kappa_k = 0.0, kappa_v = 0.0;
  for (const auto& r : trace) {
    for (const auto& m : r.matrices) c.g_max = std::max(c.g_max, m.grad_norm);
    kappa_k = std::max(kappa_k, r.matrices[1].cond);
    kappa_v = std::max(kappa_v, r.matrices[2].cond);
  }
  c.q0 = trace.front().matrices[0].fro_norm;
  c.k0 = trace.front().matrices[1].fro_norm;
  c.v0 = trace.front().matrices[2].fro_norm;
  c.c_v = lambda_min_x * gh0 / std::sqrt(seq_len);
  c.c_m = (std::sqrt(seq_len) - 1.0) * std::pow(lambda_min_x, 3.0) * gh0 /
          (std::pow(seq_len, 1.5) * std::pow(model_dim, 2.5) * kappa_k * kappa_v);
  c.epsilon_v = stability_bound(model_dim, base_lr, c.g_max, trace.back().matrices[2].nuc_norm);
  c.epsilon_q = stability_bound(model_dim, base_lr, c.g_max, trace.back().matrices[0].nuc_norm);
  return predict_thresholds(c);
}

}  // namespace sosd
