#include "sosd/analyze.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sosd/snapshot_io.hpp"
#include "sosd/spectral.hpp"

namespace sosd {

std::vector<AnalysisSeries> analyze_snapshots(const RunManifest& manifest) {
  // Group entries by matrix name, preserving first-seen order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SnapshotEntry*>> groups;
  for (const auto& entry : manifest.snapshots) {
    auto [it, inserted] = groups.try_emplace(entry.matrix);
    if (inserted) order.push_back(entry.matrix);
    it->second.push_back(&entry);
  }

  std::vector<AnalysisSeries> out;
  for (const auto& name : order) {
    const auto& entries = groups[name];
    if (entries.size() < 2) {
      throw std::runtime_error("analyze_snapshots: matrix '" + name +
                               "' has fewer than 2 snapshots");
    }
    std::vector<DenseMatrix> mats;
    std::vector<SpectralSnapshot> spectra;
    mats.reserve(entries.size());
    for (const auto* e : entries) {
      const auto path = manifest.base_dir / e->path;
      if (!std::filesystem::exists(path)) {
        throw std::runtime_error("analyze_snapshots: missing snapshot " + path.string() +
                                 " (step " + std::to_string(e->step) + ", " + name + ")");
      }
      DenseMatrix m = read_snapshot_file(path);
      if (!mats.empty() && !m.same_shape(mats.front())) {
        throw std::runtime_error("analyze_snapshots: shape drift at step " +
                                 std::to_string(e->step) + " for " + name);
      }
      spectra.push_back(singular_values(m));
      mats.push_back(std::move(m));
    }
    const DenseMatrix& final_w = mats.back();
    const SpectralSnapshot& final_sigma = spectra.back();

    AnalysisSeries series;
    series.matrix = name;
    for (std::size_t i = 0; i < mats.size(); ++i) {
      series.steps.push_back(entries[i]->step);
      series.cos_w.push_back(cosine_similarity(mats[i], final_w));
      series.cos_sigma.push_back(cosine_similarity(
          std::span<const double>(spectra[i].singular_values),
          std::span<const double>(final_sigma.singular_values)));
      if (i == 0) {
        series.sd_var.push_back(std::numeric_limits<double>::quiet_NaN());
      } else if (spectra[i - 1].trace > 0.0 && spectra[i].trace > 0.0) {
        series.sd_var.push_back(sd_variation(spectra[i - 1], spectra[i]));
      } else {
        series.sd_var.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    out.push_back(std::move(series));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_analysis(const std::vector<AnalysisSeries>& series,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_analysis: cannot open " + path.string());
  out << "matrix\tstep\tcos_w\tcos_sigma\tsd_var\n";
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.steps.size(); ++i) {
      out << s.matrix << '\t' << s.steps[i] << '\t' << fmt(s.cos_w[i]) << '\t'
          << fmt(s.cos_sigma[i]) << '\t' << fmt(s.sd_var[i]) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write_analysis: write failed");
}

std::vector<AnalysisSeries> read_analysis(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_analysis: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "matrix\tstep\tcos_w\tcos_sigma\tsd_var") {
    throw std::runtime_error("read_analysis: unexpected header");
  }
  std::vector<AnalysisSeries> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream cols(line);
    std::string name, step_tok, a, b, c;
    if (!std::getline(cols, name, '\t') || !std::getline(cols, step_tok, '\t') ||
        !std::getline(cols, a, '\t') || !std::getline(cols, b, '\t') ||
        !std::getline(cols, c, '\t')) {
      throw std::runtime_error("read_analysis: malformed row '" + line + "'");
    }
    if (out.empty() || out.back().matrix != name) {
      out.push_back(AnalysisSeries{name, {}, {}, {}, {}});
    }
    auto& s = out.back();
    s.steps.push_back(static_cast<std::size_t>(std::stoull(step_tok)));
    s.cos_w.push_back(std::stod(a));
    s.cos_sigma.push_back(std::stod(b));
    s.sd_var.push_back(std::stod(c));
  }
  return out;
}

}  // namespace sosd
