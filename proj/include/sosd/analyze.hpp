#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sosd/manifest.hpp"

namespace sosd {

/// Per-matrix series measured against the final snapshot.
struct AnalysisSeries {
  std::string matrix;
  std::vector<std::size_t> steps;
  std::vector<double> cos_w;       // cos<W_t, W_T>
  std::vector<double> cos_sigma;   // cos<Sigma_t, Sigma_T>
  std::vector<double> sd_var;      // vs previous snapshot; NaN for the first
};

/// Works on any manifest-listed snapshots, including externally produced
/// ones; needs at least two steps per matrix and consistent shapes.
std::vector<AnalysisSeries> analyze_snapshots(const RunManifest& manifest);

void write_analysis(const std::vector<AnalysisSeries>& series,
                    const std::filesystem::path& path);
std::vector<AnalysisSeries> read_analysis(const std::filesystem::path& path);

}  // namespace sosd
