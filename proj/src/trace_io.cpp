#include "sosd/trace_io.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sosd {

const char* kTraceHeader =
    "step\tloss\tlr"
    "\twq_fro\twq_nuc\twq_cond\twq_grad\twq_sdvar"
    "\twk_fro\twk_nuc\twk_cond\twk_grad\twk_sdvar"
    "\twv_fro\twv_nuc\twv_cond\twv_grad\twv_sdvar"
    "\tgamma_min\tomega_min\tbeta_est";

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok) {
  std::size_t pos = 0;
  const double v = std::stod(tok, &pos);
  if (pos != tok.size()) throw std::runtime_error("trace: malformed number '" + tok + "'");
  return v;
}

}  // namespace

std::string format_trace_row(const MetricsRecord& r) {
  std::string line = std::to_string(r.step);
  line += '\t';
  line += fmt(r.loss);
  line += '\t';
  line += fmt(r.lr);
  for (const auto& m : r.matrices) {
    for (double v : {m.fro_norm, m.nuc_norm, m.cond, m.grad_norm, m.sd_var}) {
      line += '\t';
      line += fmt(v);
    }
  }
  for (double v : {r.gamma_min, r.omega_min, r.beta_est}) {
    line += '\t';
    line += fmt(v);
  }
  return line;
}

TraceWriter::TraceWriter(const std::filesystem::path& path)
    : out_(path, std::ios::trunc) {
  if (!out_) throw std::runtime_error("TraceWriter: cannot open " + path.string());
  out_ << kTraceHeader << '\n';
  out_.flush();
}

void TraceWriter::append_trace_row(const MetricsRecord& record) {
  if (static_cast<long long>(record.step) <= last_step_) {
    throw std::invalid_argument("append_trace_row: step not strictly increasing");
  }
  out_ << format_trace_row(record) << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("append_trace_row: write failed");
  last_step_ = static_cast<long long>(record.step);
  ++rows_;
}

MetricsRecord parse_trace_row(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> tokens;
  std::string tok;
  while (std::getline(in, tok, '\t')) tokens.push_back(tok);
  if (tokens.size() != 21) {
    throw std::runtime_error("trace: expected 21 columns, got " +
                             std::to_string(tokens.size()));
  }
  MetricsRecord r;
  r.step = static_cast<std::size_t>(std::stoull(tokens[0]));
  r.loss = parse_double(tokens[1]);
  r.lr = parse_double(tokens[2]);
  std::size_t at = 3;
  for (auto& m : r.matrices) {
    m.fro_norm = parse_double(tokens[at++]);
    m.nuc_norm = parse_double(tokens[at++]);
    m.cond = parse_double(tokens[at++]);
    m.grad_norm = parse_double(tokens[at++]);
    m.sd_var = parse_double(tokens[at++]);
  }
  r.gamma_min = parse_double(tokens[at++]);
  r.omega_min = parse_double(tokens[at++]);
  r.beta_est = parse_double(tokens[at++]);
  return r;
}

std::vector<MetricsRecord> read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_trace_file: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_trace_file: empty file");
  if (line != kTraceHeader) {
    throw std::runtime_error("read_trace_file: unexpected header");
  }
  std::vector<MetricsRecord> rows;
  long long last = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRecord r = parse_trace_row(line);
    if (static_cast<long long>(r.step) <= last) {
      throw std::runtime_error("read_trace_file: non-increasing step at " +
                               std::to_string(r.step));
    }
    last = static_cast<long long>(r.step);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace sosd
