#include "sosd/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sosd/trace_io.hpp"

namespace sosd {

namespace {

constexpr double kWidth = 960.0;
constexpr double kPanelHeight = 300.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginV = 40.0;

struct LinearMap {
  double lo = 0.0, hi = 1.0, out_lo = 0.0, out_hi = 1.0;
  double operator()(double v) const {
    const double t = (v - lo) / (hi - lo);
    return out_lo + t * (out_hi - out_lo);
  }
};

std::string polyline(const std::vector<std::pair<double, double>>& pts,
                     const std::string& cls, const std::string& color) {
  std::ostringstream out;
  out << "  <polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.2\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out << ' ';
    out << pts[i].first << ',' << pts[i].second;
  }
  out << "\"/>\n";
  return out.str();
}

const char* kColors[3] = {"#1f77b4", "#ff7f0e", "#2ca02c"};

}  // namespace

void render_report(const std::vector<MetricsRecord>& trace, const OnsetScan& onsets,
                   const std::filesystem::path& out_svg) {
  if (trace.size() < 2) {
    throw std::invalid_argument("render_report: need at least two rows");
  }

  const double x_lo = static_cast<double>(trace.front().step);
  const double x_hi = static_cast<double>(trace.back().step);
  LinearMap xmap{x_lo, x_hi, kMarginLeft, kWidth - kMarginRight};

  double loss_lo = trace.front().loss, loss_hi = trace.front().loss;
  for (const auto& r : trace) {
    loss_lo = std::min(loss_lo, r.loss);
    loss_hi = std::max(loss_hi, r.loss);
  }
  if (loss_hi == loss_lo) loss_hi = loss_lo + 1.0;
  LinearMap loss_map{loss_lo, loss_hi, kMarginV + kPanelHeight, kMarginV};

  double log_lo = 0.0, log_hi = 0.0;
  bool any = false;
  for (const auto& r : trace) {
    for (const auto& m : r.matrices) {
      if (std::isfinite(m.sd_var) && m.sd_var > 0.0) {
        const double lg = std::log10(m.sd_var);
        if (!any) {
          log_lo = log_hi = lg;
          any = true;
        } else {
          log_lo = std::min(log_lo, lg);
          log_hi = std::max(log_hi, lg);
        }
      }
    }
  }
  if (!any) throw std::invalid_argument("render_report: no positive SD variation values");
  if (log_hi == log_lo) log_hi = log_lo + 1.0;
  const double panel2_top = kMarginV * 2 + kPanelHeight;
  LinearMap sd_map{log_lo, log_hi, panel2_top + kPanelHeight, panel2_top};

  std::ostringstream svg;
  const double total_height = kMarginV * 3 + kPanelHeight * 2;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << total_height << "\" viewBox=\"0 0 " << kWidth << ' ' << total_height << "\">\n";
  svg << "<g id=\"loss-panel\">\n";
  svg << "  <text x=\"" << kMarginLeft << "\" y=\"" << (kMarginV - 12)
      << "\" font-size=\"14\">training loss</text>\n";
  {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(trace.size());
    for (const auto& r : trace) {
      pts.emplace_back(xmap(static_cast<double>(r.step)), loss_map(r.loss));
    }
    svg << polyline(pts, "loss", "#d62728");
  }
  svg << "</g>\n";

  svg << "<g id=\"sdvar-panel\">\n";
  svg << "  <text x=\"" << kMarginLeft << "\" y=\"" << (panel2_top - 12)
      << "\" font-size=\"14\">SD variation (log10)</text>\n";
  for (int m = 0; m < 3; ++m) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : trace) {
      const double v = r.matrices[m].sd_var;
      if (std::isfinite(v) && v > 0.0) {
        pts.emplace_back(xmap(static_cast<double>(r.step)), sd_map(std::log10(v)));
      }
    }
    if (pts.size() >= 2) {
      svg << polyline(pts, "series", kColors[m]);
      svg << "  <text x=\"" << (kWidth - kMarginRight - 50) << "\" y=\""
          << (panel2_top + 16 + 16 * m) << "\" font-size=\"12\" fill=\"" << kColors[m]
          << "\">" << kMatrixNames[m] << "</text>\n";
    }
  }
  for (int m = 0; m < 3; ++m) {
    if (!onsets.onset[m]) continue;
    const double x = xmap(static_cast<double>(*onsets.onset[m]));
    svg << "  <line class=\"onset-marker\" x1=\"" << x << "\" y1=\"" << panel2_top
        << "\" x2=\"" << x << "\" y2=\"" << (panel2_top + kPanelHeight)
        << "\" stroke=\"" << kColors[m] << "\" stroke-dasharray=\"4 3\"/>\n";
  }
  svg << "</g>\n</svg>\n";

  std::ofstream out(out_svg, std::ios::trunc);
  if (!out) throw std::runtime_error("render_report: cannot open " + out_svg.string());
  out << svg.str();
  if (!out) throw std::runtime_error("render_report: write failed");

  // The plot is a convenience; the data alongside is the contract.
  std::filesystem::path data_path = out_svg;
  data_path += ".data.tsv";
  std::ofstream data(data_path, std::ios::trunc);
  if (!data) throw std::runtime_error("render_report: cannot open " + data_path.string());
  data << kTraceHeader << '\n';
  for (const auto& r : trace) data << format_trace_row(r) << '\n';
}

}  // namespace sosd
