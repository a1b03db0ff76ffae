#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sosd/telemetry.hpp"

namespace sosd {

/// Fixed column order: step, loss, lr, then fro/nuc/cond/grad/sd_var for
/// W_Q, W_K, W_V, then gamma_min, omega_min, beta_est. Values rendered with
/// 17 significant digits so re-parsing is exact.
extern const char* kTraceHeader;

class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path);

  /// Appends one row and flushes. Rejects non-monotone steps.
  void append_trace_row(const MetricsRecord& record);

  std::size_t rows_written() const { return rows_; }

 private:
  std::ofstream out_;
  std::size_t rows_ = 0;
  long long last_step_ = -1;
};

std::string format_trace_row(const MetricsRecord& record);

std::vector<MetricsRecord> read_trace_file(const std::filesystem::path& path);
MetricsRecord parse_trace_row(const std::string& line);

}  // namespace sosd
