#pragma once

#include <string>
#include <vector>

namespace dfd {

// One dataset row: a WAV path relative to the manifest's directory, its
// class, the generating system ("-" for bonafide), and the split it belongs
// to. Stored as JSON-lines.
struct ManifestEntry {
  std::string path;
  int label = 0;  // 1 = fake
  std::string system = "-";
  std::string split = "train";
};

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

std::vector<ManifestEntry> filter_split(const std::vector<ManifestEntry>& entries,
                                        const std::string& split);

// Directory the entry paths are relative to.
std::string manifest_dir(const std::string& manifest_path);

}  // namespace dfd
