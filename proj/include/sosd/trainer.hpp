#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "sosd/config.hpp"
#include "sosd/manifest.hpp"
#include "sosd/telemetry.hpp"

namespace sosd {

struct TrainResult {
  std::vector<MetricsRecord> trace;
  ModelState final_state;
  double final_loss = 0.0;
  RunManifest manifest;
  std::filesystem::path trace_path;
  std::filesystem::path manifest_path;
};

/// Runs the configured training loop. When out_dir is set, writes
/// manifest.txt, trace.tsv and the snapshot files there; otherwise the run
/// stays in memory (snapshots skipped).
TrainResult train_run(const RunConfig& config,
                      const std::optional<std::filesystem::path>& out_dir);

}  // namespace sosd
