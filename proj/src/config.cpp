#include "sosd/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sosd {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& section, const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad number for " + section + "." + key + ": '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& section, const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer for " + section + "." + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& section, const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::runtime_error("config: bad boolean for " + section + "." + key + ": '" + v + "'");
}

std::vector<double> to_double_list(const std::string& section, const std::string& key,
                                   const std::string& v) {
  std::vector<double> out;
  std::istringstream in(v);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(to_double(section, key, tok));
  }
  return out;
}

}  // namespace

std::map<std::string, std::map<std::string, std::string>> parse_sections(
    const std::string& text) {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               " is not 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
    }
    sections[section][key] = value;
  }
  return sections;
}

void RunConfig::validate() const {
  model.validate();
  optimizer.validate();
  schedule.validate(steps);
  if (steps < 1) throw std::invalid_argument("RunConfig: steps >= 1 required");
  if (noise < 0.0) throw std::invalid_argument("RunConfig: noise >= 0 required");
  if (batch_size > model.n) {
    throw std::invalid_argument("RunConfig: batch_size exceeds sequence length");
  }
  if (snapshot_every < 1) throw std::invalid_argument("RunConfig: snapshot_every >= 1");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  const auto sections = parse_sections(text);
  for (const auto& [section, kvs] : sections) {
    for (const auto& [key, value] : kvs) {
      if (section == "model") {
        if (key == "n") cfg.model.n = to_u64(section, key, value);
        else if (key == "d") cfg.model.d = to_u64(section, key, value);
        else if (key == "classes") cfg.model.classes = to_u64(section, key, value);
        else if (key == "init_sigma") cfg.model.init_sigma = to_double(section, key, value);
        else if (key == "seed") cfg.model.seed = to_u64(section, key, value);
        else if (key == "noise") cfg.noise = to_double(section, key, value);
        else if (key == "data_seed") cfg.data_seed = to_u64(section, key, value);
        else throw std::runtime_error("config: unknown key model." + key);
      } else if (section == "train") {
        if (key == "steps") cfg.steps = to_u64(section, key, value);
        else if (key == "optimizer") cfg.optimizer.kind = optimizer_kind_from_string(value);
        else if (key == "weight_decay") cfg.optimizer.weight_decay = to_double(section, key, value);
        else if (key == "clip_norm") cfg.optimizer.clip_norm = to_double(section, key, value);
        else if (key == "batch_size") cfg.batch_size = to_u64(section, key, value);
        else if (key == "resample") cfg.resample = to_bool(section, key, value);
        else if (key == "snapshot_dense_until") cfg.snapshot_dense_until = to_u64(section, key, value);
        else if (key == "snapshot_every") cfg.snapshot_every = to_u64(section, key, value);
        else throw std::runtime_error("config: unknown key train." + key);
      } else if (section == "schedule") {
        if (key == "kind") cfg.schedule.kind = schedule_kind_from_string(value);
        else if (key == "base_lr") cfg.schedule.base_lr = to_double(section, key, value);
        else if (key == "milestones") cfg.schedule.milestones = to_double_list(section, key, value);
        else if (key == "drop_factor") cfg.schedule.drop_factor = to_double(section, key, value);
        else if (key == "warmup") cfg.schedule.warmup_steps = to_u64(section, key, value);
        else if (key == "stable") cfg.schedule.stable_steps = to_u64(section, key, value);
        else if (key == "decay") cfg.schedule.decay_steps = to_u64(section, key, value);
        else if (key == "cosine_warmup") cfg.schedule.cosine_warmup = to_u64(section, key, value);
        else if (key == "min_ratio") cfg.schedule.min_ratio = to_double(section, key, value);
        else throw std::runtime_error("config: unknown key schedule." + key);
      } else if (section == "adamw") {
        if (key == "beta1") cfg.optimizer.beta1 = to_double(section, key, value);
        else if (key == "beta2") cfg.optimizer.beta2 = to_double(section, key, value);
        else if (key == "eps") cfg.optimizer.eps_adam = to_double(section, key, value);
        else throw std::runtime_error("config: unknown key adamw." + key);
      } else if (section == "muon") {
        if (key == "momentum") cfg.optimizer.muon_momentum = to_double(section, key, value);
        else if (key == "ns_steps") cfg.optimizer.newton_schulz_steps =
            static_cast<int>(to_u64(section, key, value));
        else throw std::runtime_error("config: unknown key muon." + key);
      } else {
        throw std::runtime_error("config: unknown section [" + section + "]");
      }
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "[model]\n";
  out << "n = " << cfg.model.n << '\n';
  out << "d = " << cfg.model.d << '\n';
  out << "classes = " << cfg.model.classes << '\n';
  out << "init_sigma = " << fmt_double(cfg.model.init_sigma) << '\n';
  out << "seed = " << cfg.model.seed << '\n';
  out << "noise = " << fmt_double(cfg.noise) << '\n';
  out << "data_seed = " << cfg.data_seed << '\n';
  out << "\n[train]\n";
  out << "steps = " << cfg.steps << '\n';
  out << "optimizer = " << to_string(cfg.optimizer.kind) << '\n';
  out << "weight_decay = " << fmt_double(cfg.optimizer.weight_decay) << '\n';
  out << "clip_norm = " << fmt_double(cfg.optimizer.clip_norm) << '\n';
  out << "batch_size = " << cfg.batch_size << '\n';
  out << "resample = " << (cfg.resample ? "true" : "false") << '\n';
  out << "snapshot_dense_until = " << cfg.snapshot_dense_until << '\n';
  out << "snapshot_every = " << cfg.snapshot_every << '\n';
  out << "\n[schedule]\n";
  out << "kind = " << to_string(cfg.schedule.kind) << '\n';
  out << "base_lr = " << fmt_double(cfg.schedule.base_lr) << '\n';
  if (!cfg.schedule.milestones.empty()) {
    out << "milestones = ";
    for (std::size_t i = 0; i < cfg.schedule.milestones.size(); ++i) {
      if (i) out << ',';
      out << fmt_double(cfg.schedule.milestones[i]);
    }
    out << '\n';
    out << "drop_factor = " << fmt_double(cfg.schedule.drop_factor) << '\n';
  }
  if (cfg.schedule.kind == ScheduleKind::kWsd) {
    out << "warmup = " << cfg.schedule.warmup_steps << '\n';
    out << "stable = " << cfg.schedule.stable_steps << '\n';
    out << "decay = " << cfg.schedule.decay_steps << '\n';
  }
  if (cfg.schedule.kind == ScheduleKind::kCosine) {
    out << "cosine_warmup = " << cfg.schedule.cosine_warmup << '\n';
    out << "min_ratio = " << fmt_double(cfg.schedule.min_ratio) << '\n';
  }
  out << "\n[adamw]\n";
  out << "beta1 = " << fmt_double(cfg.optimizer.beta1) << '\n';
  out << "beta2 = " << fmt_double(cfg.optimizer.beta2) << '\n';
  out << "eps = " << fmt_double(cfg.optimizer.eps_adam) << '\n';
  out << "\n[muon]\n";
  out << "momentum = " << fmt_double(cfg.optimizer.muon_momentum) << '\n';
  out << "ns_steps = " << cfg.optimizer.newton_schulz_steps << '\n';
  return out.str();
}

}  // namespace sosd
