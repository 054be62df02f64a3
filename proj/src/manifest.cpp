#include "dfd/manifest.hpp"

#include <filesystem>
#include <fstream>

#include "dfd/error.hpp"
#include "json.hpp"

namespace dfd {

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(Errc::unwritable_path, "cannot write manifest: " + path);
  for (const auto& e : entries) {
    const nlohmann::json j = {{"path", e.path},
                              {"label", e.label == 1 ? "fake" : "bonafide"},
                              {"system", e.system},
                              {"split", e.split}};
    f << j.dump() << '\n';
  }
  if (!f.flush()) fail(Errc::unwritable_path, "manifest write failed: " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::file_missing, "cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      fail(Errc::corrupt_file, path + ":" + std::to_string(line_no) + ": not valid JSON");
    }
    ManifestEntry e;
    e.path = j.at("path").get<std::string>();
    const std::string label = j.at("label").get<std::string>();
    if (label == "fake")
      e.label = 1;
    else if (label == "bonafide")
      e.label = 0;
    else
      fail(Errc::corrupt_file,
           path + ":" + std::to_string(line_no) + ": unknown label '" + label + "'");
    e.system = j.value("system", "-");
    e.split = j.value("split", "train");
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ManifestEntry> filter_split(const std::vector<ManifestEntry>& entries,
                                        const std::string& split) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

std::string manifest_dir(const std::string& manifest_path) {
  const auto parent = std::filesystem::path(manifest_path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

}  // namespace dfd
