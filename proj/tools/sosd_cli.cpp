#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sosd/analyze.hpp"
#include "sosd/config.hpp"
#include "sosd/manifest.hpp"
#include "sosd/report.hpp"
#include "sosd/snapshot_io.hpp"
#include "sosd/telemetry.hpp"
#include "sosd/trace_io.hpp"
#include "sosd/trainer.hpp"
#include "sosd/verification.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

void print_suite(const sosd::SuiteReport& r) {
  std::printf("%-10s trials=%zu dims=[%zu,%zu] violations=%zu worst_slack=%.3e min_margin=%.3e  %s\n",
              r.name.c_str(), r.trials, r.dim_min, r.dim_max, r.violations, r.worst_slack,
              r.min_margin, r.passed() ? "ok" : "VIOLATED");
}

int run_verify(const std::string& suite, std::size_t trials, std::uint64_t seed,
               std::size_t dim_min, std::size_t dim_max) {
  bool all_ok = true;
  if (suite == "lemmas" || suite == "all") {
    for (sosd::Lemma lemma : {sosd::Lemma::kL1, sosd::Lemma::kL2, sosd::Lemma::kL3,
                              sosd::Lemma::kL4, sosd::Lemma::kL6, sosd::Lemma::kL7,
                              sosd::Lemma::kL8}) {
      const auto report = sosd::check_inequality_suite(lemma, trials, seed, dim_min, dim_max);
      print_suite(report);
      all_ok = all_ok && report.passed();
    }
  }
  if (suite == "descent" || suite == "all") {
    for (double beta : {0.5, 2.0, 8.0}) {
      for (double eta_frac : {0.25, 0.5, 1.0}) {
        const double eta = eta_frac / beta;
        auto report = sosd::check_descent_lemma(beta, eta, trials, seed);
        report.name = "L5(b=" + std::to_string(beta).substr(0, 3) + ")";
        print_suite(report);
        all_ok = all_ok && report.passed();
      }
    }
  }
  if (suite == "gradcheck" || suite == "all") {
    const auto configs = sosd::default_gradcheck_configs(20, seed);
    const auto report = sosd::finite_diff_gradcheck(configs);
    std::printf("gradcheck configs=%zu worst_rel_error=%.3e  %s\n", report.configs,
                report.worst_rel_error, report.passed() ? "ok" : "VIOLATED");
    all_ok = all_ok && report.passed();
  }
  return all_ok ? kExitOk : kExitViolation;
}

int run_predict(const std::filesystem::path& manifest_path) {
  const auto manifest = sosd::read_manifest(manifest_path);
  const auto trace = sosd::read_trace_file(manifest.base_dir / "trace.tsv");
  if (trace.empty()) throw std::runtime_error("predict-thresholds: empty trace");
  const auto& cfg = manifest.config;
  const double d = static_cast<double>(cfg.model.d);
  const double n = static_cast<double>(cfg.model.n);

  // Step-0 quantities are recomputed from the config echo.
  sosd::ModelState state0 = sosd::init_params(cfg.model);
  sosd::Batch batch = sosd::gen_dataset(cfg.model, cfg.noise, cfg.effective_data_seed());
  const auto cache0 = sosd::forward(state0, batch);
  const auto grads0 = sosd::backward(state0, batch, cache0);
  const double gh0 = sosd::frobenius_norm(grads0.g_h);
  const double lambda_min_x = sosd::singular_values(batch.x).singular_values.back();

  const sosd::ThresholdConstants c = sosd::measure_threshold_constants(
      trace, d, n, cfg.schedule.base_lr, gh0, lambda_min_x);

  const auto onsets = sosd::scan_onsets(trace, d, cfg.schedule.base_lr, 50);
  std::printf("d=%g eta=%g G=%.6g\n", c.d, c.eta, c.g_max);
  std::printf("v0=%.6g q0=%.6g k0=%.6g\n", c.v0, c.q0, c.k0);
  std::printf("C_V=%.6g C_M=%.6g C_0=%.6g\n", c.c_v, c.c_m, c.c_0);
  std::printf("epsilon_V=%.6g epsilon_Q=%.6g\n", c.epsilon_v, c.epsilon_q);
  std::printf("T_V=%.6g T_QK=%.6g%s T_star=%.6g (C=%g)\n", c.t_v, c.t_qk,
              c.qk_bound_at_init ? " [bound already satisfied at init]" : "", c.t_star,
              c.scale_c);
  for (int m = 0; m < 3; ++m) {
    if (onsets.onset[m]) {
      std::printf("empirical onset %s: %zu (eps=%.3e)\n", sosd::kMatrixNames[m],
                  *onsets.onset[m], onsets.epsilon[m]);
    } else {
      std::printf("empirical onset %s: none (eps=%.3e)\n", sosd::kMatrixNames[m],
                  onsets.epsilon[m]);
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral telemetry laboratory for a single-head attention model"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run a training loop with telemetry");
  std::string train_config, train_out;
  train->add_option("--config", train_config, "run config file")->required();
  train->add_option("--out", train_out, "output directory")->required();

  auto* analyze = app.add_subcommand("analyze", "cosine-to-final series from snapshots");
  std::string analyze_manifest, analyze_out;
  analyze->add_option("--manifest", analyze_manifest, "run manifest")->required();
  analyze->add_option("--out", analyze_out, "output directory")->required();

  auto* verify = app.add_subcommand("verify", "numeric certification suites");
  std::string suite = "all";
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  std::size_t dim_min = 2, dim_max = 16;
  verify->add_option("--suite", suite, "lemmas|gradcheck|descent|all")
      ->check(CLI::IsMember({"lemmas", "gradcheck", "descent", "all"}));
  verify->add_option("--trials", trials, "trials per suite");
  verify->add_option("--seed", seed, "base seed");
  verify->add_option("--dim-min", dim_min, "smallest sampled dimension");
  verify->add_option("--dim-max", dim_max, "largest sampled dimension");

  auto* predict = app.add_subcommand("predict-thresholds", "threshold constants for a run");
  std::string predict_manifest;
  predict->add_option("--manifest", predict_manifest, "run manifest")->required();

  auto* report = app.add_subcommand("report", "render the two-panel SVG");
  std::string report_trace, report_out;
  double report_dim = 32.0;
  std::size_t report_window = 50;
  report->add_option("--trace", report_trace, "trace file")->required();
  report->add_option("--out", report_out, "output SVG path")->required();
  report->add_option("--dim", report_dim, "feature dimension for the stability bound");
  report->add_option("--window", report_window, "onset window");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train->parsed()) {
      const auto cfg = sosd::load_run_config(train_config);
      const auto result = sosd::train_run(cfg, std::filesystem::path(train_out));
      std::printf("steps=%zu final_loss=%.6f trace=%s manifest=%s\n", cfg.steps,
                  result.final_loss, result.trace_path.string().c_str(),
                  result.manifest_path.string().c_str());
      return kExitOk;
    }
    if (analyze->parsed()) {
      const auto manifest = sosd::read_manifest(analyze_manifest);
      const auto series = sosd::analyze_snapshots(manifest);
      std::filesystem::create_directories(analyze_out);
      const auto out_path = std::filesystem::path(analyze_out) / "analysis.tsv";
      sosd::write_analysis(series, out_path);
      std::printf("analyzed %zu matrices -> %s\n", series.size(), out_path.string().c_str());
      return kExitOk;
    }
    if (verify->parsed()) {
      return run_verify(suite, trials, seed, dim_min, dim_max);
    }
    if (predict->parsed()) {
      return run_predict(predict_manifest);
    }
    if (report->parsed()) {
      const auto trace = sosd::read_trace_file(report_trace);
      if (trace.size() < 2) throw std::invalid_argument("report: trace has fewer than 2 rows");
      double base_lr = 0.0;
      for (const auto& r : trace) base_lr = std::max(base_lr, r.lr);
      const auto onsets = sosd::scan_onsets(trace, report_dim, base_lr, report_window);
      sosd::render_report(trace, onsets, report_out);
      std::printf("report -> %s\n", report_out.c_str());
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
  return kExitUsage;
}
