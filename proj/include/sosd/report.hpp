#pragma once

#include <filesystem>
#include <vector>

#include "sosd/telemetry.hpp"

namespace sosd {

/// Two-panel SVG: loss on top, per-matrix SD variation on a log scale below,
/// one polyline per series, with a vertical marker at each detected onset.
/// The raw rows are also copied next to the plot (<out>.data.tsv).
void render_report(const std::vector<MetricsRecord>& trace, const OnsetScan& onsets,
                   const std::filesystem::path& out_svg);

}  // namespace sosd
