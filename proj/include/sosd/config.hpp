#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "sosd/model.hpp"
#include "sosd/optim.hpp"

namespace sosd {

/// Everything a run needs; round-trips through the sectioned key=value text
/// format so a manifest echo fully reproduces the run.
struct RunConfig {
  ModelConfig model;
  double noise = 0.3;
  std::uint64_t data_seed = 0;  // 0: derived as model.seed + 1

  std::size_t steps = 5000;
  OptimizerSpec optimizer;
  ScheduleSpec schedule;

  std::size_t batch_size = 0;   // 0 = full batch
  bool resample = false;        // redraw tokens every step (class means fixed)
  std::size_t snapshot_dense_until = 1000;
  std::size_t snapshot_every = 10;

  std::uint64_t effective_data_seed() const {
    return data_seed != 0 ? data_seed : model.seed + 1;
  }
  void validate() const;
};

/// Flat sectioned "key = value" text. Unknown keys are rejected.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string serialize_run_config(const RunConfig& config);

/// Raw section/key map, used by the manifest reader.
std::map<std::string, std::map<std::string, std::string>> parse_sections(
    const std::string& text);

}  // namespace sosd
