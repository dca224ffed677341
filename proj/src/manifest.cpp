#include "castscan/manifest.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "castscan/errors.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace castscan {

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();

  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    json rec = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (rec.is_discarded() || !rec.is_object()) throw ManifestError(where + ": not a JSON object");
    ManifestEntry entry;
    try {
      entry.video_id = rec.at("video_id").get<std::string>();
      entry.source = rec.at("source").get<std::string>();
      if (rec.contains("truth_label") && !rec["truth_label"].is_null()) {
        entry.truth_label = rec["truth_label"].get<bool>();
      }
      entry.notes = rec.value("notes", std::string{});
    } catch (const json::exception& e) {
      throw ManifestError(where + ": " + e.what());
    }
    if (entry.video_id.empty()) throw ManifestError(where + ": empty video_id");
    if (!seen.insert(entry.video_id).second) {
      throw ManifestError(where + ": duplicate video_id '" + entry.video_id + "'");
    }
    if (entry.source.is_relative()) entry.source = base / entry.source;
    entries.push_back(std::move(entry));
  }
  return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw EnvironmentError("cannot write manifest " + path.string());
  for (const auto& e : entries) {
    json rec;
    rec["video_id"] = e.video_id;
    rec["source"] = e.source.string();
    rec["truth_label"] = e.truth_label ? json(*e.truth_label) : json(nullptr);
    rec["notes"] = e.notes;
    out << rec.dump() << '\n';
  }
}

}  // namespace castscan
