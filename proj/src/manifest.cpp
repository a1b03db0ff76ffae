#include "sosd/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sosd {

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path.string());
  out << "[run]\n";
  out << "id = " << manifest.run_id << "\n\n";
  out << serialize_run_config(manifest.config);
  out << "\n[snapshots]\n";
  long long last = -1;
  for (const auto& entry : manifest.snapshots) {
    if (static_cast<long long>(entry.step) < last) {
      throw std::invalid_argument("write_manifest: snapshot steps must be nondecreasing");
    }
    last = static_cast<long long>(entry.step);
    out << entry.step << '\t' << entry.matrix << '\t' << entry.path << '\n';
  }
  if (!out) throw std::runtime_error("write_manifest: write failed");
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_manifest: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  // The snapshot list is line-oriented; split it off before the key=value parse.
  const std::string marker = "[snapshots]";
  const auto at = text.find(marker);
  if (at == std::string::npos) {
    throw std::runtime_error("read_manifest: missing [snapshots] section");
  }
  const std::string head = text.substr(0, at);
  const std::string tail = text.substr(at + marker.size());

  RunManifest manifest;
  const auto sections = parse_sections(head);
  const auto run_it = sections.find("run");
  if (run_it == sections.end() || !run_it->second.count("id")) {
    throw std::runtime_error("read_manifest: missing run id");
  }
  manifest.run_id = run_it->second.at("id");

  // Re-serialize everything except [run] for the config parser.
  std::ostringstream cfg_text;
  for (const auto& [section, kvs] : sections) {
    if (section == "run") continue;
    cfg_text << '[' << section << "]\n";
    for (const auto& [k, v] : kvs) cfg_text << k << " = " << v << '\n';
  }
  manifest.config = parse_run_config(cfg_text.str());

  std::istringstream lines(tail);
  std::string line;
  long long last = -1;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream cols(line);
    SnapshotEntry entry;
    std::string step_tok;
    if (!std::getline(cols, step_tok, '\t') || !std::getline(cols, entry.matrix, '\t') ||
        !std::getline(cols, entry.path, '\t')) {
      throw std::runtime_error("read_manifest: malformed snapshot line '" + line + "'");
    }
    entry.step = static_cast<std::size_t>(std::stoull(step_tok));
    if (static_cast<long long>(entry.step) < last) {
      throw std::runtime_error("read_manifest: snapshot steps decrease at " + step_tok);
    }
    last = static_cast<long long>(entry.step);
    manifest.snapshots.push_back(std::move(entry));
  }
  manifest.base_dir = path.parent_path();
  return manifest;
}

}  // namespace sosd
