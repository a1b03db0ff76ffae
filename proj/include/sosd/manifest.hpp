#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sosd/config.hpp"

namespace sosd {

struct SnapshotEntry {
  std::size_t step;
  std::string matrix;  // free-form name
  std::string path;    // relative to the manifest's directory
};

/// Run identity + full config echo + ordered snapshot index.
struct RunManifest {
  std::string run_id;
  RunConfig config;
  std::vector<SnapshotEntry> snapshots;  // nondecreasing steps

  std::filesystem::path base_dir;  // set on load; resolves snapshot paths
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace sosd
