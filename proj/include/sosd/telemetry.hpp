#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sosd/model.hpp"
#include "sosd/spectral.hpp"

namespace sosd {

inline constexpr std::array<const char*, 3> kMatrixNames = {"W_Q", "W_K", "W_V"};

struct PerMatrixMetrics {
  double fro_norm = 0.0;
  double nuc_norm = 0.0;
  double cond = 0.0;          // +inf when flagged
  double grad_norm = 0.0;
  double sd_var = 0.0;        // ||Sig_hat(t+1) - Sig_hat(t)||_F, NaN when skipped
  double cos_to_final = std::numeric_limits<double>::quiet_NaN();  // post-pass
};

/// One training step's telemetry row.
struct MetricsRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::array<PerMatrixMetrics, 3> matrices;  // W_Q, W_K, W_V order
  double gamma_min = 0.0;
  double omega_min = 0.0;
  double beta_est = std::numeric_limits<double>::quiet_NaN();  // NaN until step 1
  double g_h_norm = std::numeric_limits<double>::quiet_NaN();  // in-memory only
};

struct ThresholdConstants {
  double d = 0.0;
  double eta = 0.0;
  double g_max = 0.0;   // running max gradient norm G
  double v0 = 0.0, q0 = 0.0, k0 = 0.0;
  double c_v = 0.0, c_m = 0.0, c_0 = 0.0;
  double epsilon_v = 0.0, epsilon_q = 0.0;
  double t_v = 0.0, t_qk = 0.0, t_star = 0.0;
  double scale_c = 1.0;            // the unspecified constant C, default 1
  bool qk_bound_at_init = false;   // Lambda(eps) <= 0: already stable at init
};

struct PhaseReport {
  std::array<std::optional<std::size_t>, 3> sosd_onset;  // per matrix
  std::array<double, 3> onset_epsilon = {0.0, 0.0, 0.0};
  std::optional<std::size_t> phase1_end;     // T_f
  std::optional<std::size_t> phase2_start;   // T_s
  std::optional<std::size_t> beta_threshold; // T_beta, reported only
  double phase1_mean_dl = std::numeric_limits<double>::quiet_NaN();
  double phase2_mean_dl = std::numeric_limits<double>::quiet_NaN();
  double p_hat = std::numeric_limits<double>::quiet_NaN();
  bool p_hat_available = false;
  double d_estimate = std::numeric_limits<double>::quiet_NaN();
  double phase1_bound = std::numeric_limits<double>::quiet_NaN();       // 3 D^2 eta / (2(1+sqrt d))
  double phase1_bound_eta_free = std::numeric_limits<double>::quiet_NaN();
};

struct AssumptionReport {
  std::vector<std::size_t> norm_decrease_steps;  // steps where any trainable fro norm fell
  std::array<double, 3> max_condition = {0.0, 0.0, 0.0};
  double g_max = 0.0;
  bool g_h_vanished = false;  // ||G_H|| dipped below 1e-12
};

/// Largest minus second-largest entry. Rejects vectors shorter than 2.
double gap(std::span<const double> u);

/// (gamma_min, omega_min): minimum row gaps of the norm-normalized scores
/// and of the W_V-normalized logits. May be negative early in training.
std::pair<double, double> margins(const ModelState& state, const ForwardCache& cache,
                                  std::span<const int> labels);
std::pair<double, double> margins_with_norms(const ForwardCache& cache,
                                             std::span<const int> labels, double nuc_q,
                                             double nuc_k, double nuc_v);

/// ||grad_next - grad_prev||_F / ||theta_next - theta_prev||_F over the
/// concatenated trainables. A lower bound on any valid local beta.
double estimate_beta(std::span<const double> theta_prev, std::span<const double> theta_next,
                     std::span<const double> grad_prev, std::span<const double> grad_next);
double estimate_beta(const ModelState& prev_state, const ModelState& next_state,
                     const GradientSet& prev_grads, const GradientSet& next_grads);

/// eps = (1 + sqrt(d)) * eta * G / tau. Rejects tau <= 0.
double stability_bound(double d, double eta, double g, double tau);

ThresholdConstants predict_thresholds(ThresholdConstants constants);

/// Smallest t with `window` consecutive sub-eps values; nullopt if absent.
std::optional<std::size_t> detect_sosd_onset(std::span<const double> sd_trace, double eps,
                                             std::size_t window);

AssumptionReport assumption_monitor(const std::vector<MetricsRecord>& trace);

struct OnsetScan {
  std::array<std::optional<std::size_t>, 3> onset;
  std::array<double, 3> epsilon = {0.0, 0.0, 0.0};
  std::array<std::size_t, 3> peak_step = {0, 0, 0};
};

/// Pipeline onset detection: per matrix, eps from the running-max gradient
/// norm and the final nuclear norm, scanned from the SD-variation peak so the
/// result marks the settle into the terminal floor rather than the quiet
/// stretch before restructuring begins.
OnsetScan scan_onsets(const std::vector<MetricsRecord>& trace, double model_dim,
                      double base_lr, std::size_t window);

PhaseReport phase_report(const std::vector<MetricsRecord>& trace, const OnsetScan& onsets,
                         double model_dim, double base_lr);

/// Threshold constants measured from a finished trace plus the step-0
/// anchors ||G_H(0)|| and lambda_min(X).
ThresholdConstants measure_threshold_constants(const std::vector<MetricsRecord>& trace,
                                               double model_dim, double seq_len,
                                               double base_lr, double gh0,
                                               double lambda_min_x);

}  // namespace sosd
