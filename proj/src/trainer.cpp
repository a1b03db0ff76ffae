#include "sosd/trainer.hpp"

#include <cmath>
#include <random>

#include "sosd/snapshot_io.hpp"
#include "sosd/trace_io.hpp"

namespace sosd {

namespace {

struct MatrixTelemetry {
  SpectralSnapshot spectrum;
  NormBundle norms;
};

MatrixTelemetry measure(const DenseMatrix& w) {
  MatrixTelemetry t;
  t.spectrum = singular_values(w);
  double sq = 0.0;
  for (double s : t.spectrum.singular_values) sq += s * s;
  t.norms.frobenius = std::sqrt(sq);
  t.norms.nuclear = t.spectrum.trace;
  t.norms.spectral = t.spectrum.singular_values.front();
  const double smin = t.spectrum.singular_values.back();
  if (smin > 1e-14 * t.norms.spectral && smin > 0.0) {
    t.norms.condition_number = t.norms.spectral / smin;
    t.norms.condition_finite = true;
  } else {
    t.norms.condition_number = std::numeric_limits<double>::infinity();
    t.norms.condition_finite = false;
  }
  return t;
}

Batch subsample(const Batch& full, std::size_t batch_size, std::uint64_t seed,
                std::size_t step) {
  std::seed_seq seq{seed, static_cast<std::uint64_t>(step), std::uint64_t{77}};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> idx(full.x.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = idx.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(idx[i], idx[pick(rng)]);
  }
  Batch out;
  out.x = DenseMatrix(batch_size, full.x.cols());
  out.labels.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    for (std::size_t j = 0; j < full.x.cols(); ++j) out.x(i, j) = full.x(idx[i], j);
    out.labels[i] = full.labels[idx[i]];
  }
  return out;
}

}  // namespace

TrainResult train_run(const RunConfig& config,
                      const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  const std::size_t total = config.steps;

  ModelState state = init_params(config.model);
  Batch base_batch = gen_dataset(config.model, config.noise, config.effective_data_seed());

  OptState opt_state = OptState::create(config.optimizer, state);

  TrainResult result;
  result.manifest.run_id = "run-seed" + std::to_string(config.model.seed) + "-" +
                           to_string(config.optimizer.kind) + "-" +
                           to_string(config.schedule.kind);
  result.manifest.config = config;

  std::optional<TraceWriter> writer;
  std::filesystem::path snap_dir;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    snap_dir = *out_dir / "snapshots";
    std::filesystem::create_directories(snap_dir);
    result.trace_path = *out_dir / "trace.tsv";
    result.manifest_path = *out_dir / "manifest.txt";
    writer.emplace(result.trace_path);
  }

  auto want_snapshot = [&](std::size_t t) {
    return t < config.snapshot_dense_until || t % config.snapshot_every == 0 || t == total;
  };
  auto save_snapshots = [&](std::size_t t) {
    if (!out_dir || !want_snapshot(t)) return;
    const DenseMatrix* ws[3] = {&state.w_q, &state.w_k, &state.w_v};
    for (int m = 0; m < 3; ++m) {
      std::string name = std::string("step") + std::to_string(t) + "_" + kMatrixNames[m] + ".sosd";
      write_snapshot_file(*ws[m], snap_dir / name);
      result.manifest.snapshots.push_back(
          {t, kMatrixNames[m], (std::filesystem::path("snapshots") / name).string()});
    }
  };

  std::array<SpectralSnapshot, 3> prev_spectra;
  bool have_pending = false;
  MetricsRecord pending;  // row t-1, waiting for its sd_var

  ModelState prev_state;
  GradientSet prev_grads;
  bool have_prev_grads = false;

  auto flush_pending = [&](const std::array<SpectralSnapshot, 3>& now) {
    if (!have_pending) return;
    for (int m = 0; m < 3; ++m) {
      double v = std::numeric_limits<double>::quiet_NaN();
      if (prev_spectra[m].trace > 0.0 && now[m].trace > 0.0) {
        v = sd_variation(prev_spectra[m], now[m]);
      }
      pending.matrices[m].sd_var = v;
    }
    result.trace.push_back(pending);
    if (writer) writer->append_trace_row(pending);
    have_pending = false;
  };

  for (std::size_t t = 0; t < total; ++t) {
    const double lr = lr_at(config.schedule, t, total);

    Batch step_batch = base_batch;
    if (config.resample && t > 0) {
      step_batch = gen_dataset(config.model, config.noise,
                               config.effective_data_seed() + 1 + t);
    }
    if (config.batch_size > 0 && config.batch_size < step_batch.x.rows()) {
      step_batch = subsample(step_batch, config.batch_size, config.model.seed, t);
    }

    const ForwardCache cache = forward(state, step_batch);
    const GradientSet grads = backward(state, step_batch, cache);

    std::array<SpectralSnapshot, 3> spectra;
    MetricsRecord rec;
    rec.step = t;
    rec.loss = cache.loss;
    rec.lr = lr;
    const DenseMatrix* ws[3] = {&state.w_q, &state.w_k, &state.w_v};
    const DenseMatrix* gs[3] = {&grads.g_wq, &grads.g_wk, &grads.g_wv};
    for (int m = 0; m < 3; ++m) {
      MatrixTelemetry mt = measure(*ws[m]);
      rec.matrices[m].fro_norm = mt.norms.frobenius;
      rec.matrices[m].nuc_norm = mt.norms.nuclear;
      rec.matrices[m].cond = mt.norms.condition_number;
      rec.matrices[m].grad_norm = frobenius_norm(*gs[m]);
      spectra[m] = std::move(mt.spectrum);
    }
    auto [gamma_min, omega_min] = margins_with_norms(
        cache, step_batch.labels, rec.matrices[0].nuc_norm, rec.matrices[1].nuc_norm,
        rec.matrices[2].nuc_norm);
    rec.gamma_min = gamma_min;
    rec.omega_min = omega_min;
    rec.g_h_norm = frobenius_norm(grads.g_h);
    if (have_prev_grads) {
      // Zero-lr steps (warmup) leave the parameters in place; the estimate is
      // undefined there and the row records a skip.
      const bool moved = !(prev_state.w_q.data() == state.w_q.data() &&
                           prev_state.w_k.data() == state.w_k.data() &&
                           prev_state.w_v.data() == state.w_v.data());
      if (moved) rec.beta_est = estimate_beta(prev_state, state, prev_grads, grads);
    }

    flush_pending(spectra);
    pending = rec;
    have_pending = true;
    prev_spectra = spectra;

    save_snapshots(t);

    prev_state = state;
    prev_grads = grads;
    have_prev_grads = true;

    optimizer_step(state, grads, config.optimizer, opt_state, lr);
  }

  // Final spectra close the last row; final state is snapshot "step == total".
  std::array<SpectralSnapshot, 3> final_spectra;
  const DenseMatrix* ws[3] = {&state.w_q, &state.w_k, &state.w_v};
  for (int m = 0; m < 3; ++m) final_spectra[m] = singular_values(*ws[m]);
  flush_pending(final_spectra);
  save_snapshots(total);

  result.final_state = state;
  result.final_loss = forward(state, base_batch).loss;
  if (out_dir) write_manifest(result.manifest, result.manifest_path);
  return result;
}

}  // namespace sosd
