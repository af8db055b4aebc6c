#include "cough/manifest.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "cough/error.hpp"
#include "cough/util.hpp"
#include "json.hpp"

namespace cough {

const ManifestRow* Manifest::find(const std::string& clip_id) const {
  for (const auto& r : rows)
    if (r.clip_id == clip_id) return &r;
  return nullptr;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::istringstream ss(read_file(path));
  std::string line;
  if (!std::getline(ss, line)) throw Error("BadManifest", "empty manifest " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "clip_id,path,label,fold")
    throw Error("BadManifest", "expected header 'clip_id,path,label,fold', got '" + line + "'");

  Manifest m;
  std::set<std::string> seen;
  std::size_t lineno = 1;
  while (std::getline(ss, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 4)
      throw Error("BadManifest", "line " + std::to_string(lineno) + ": expected 4 fields");
    ManifestRow row;
    row.clip_id = fields[0];
    row.path = fields[1];
    if (row.clip_id.empty()) throw Error("BadManifest", "line " + std::to_string(lineno) + ": empty clip_id");
    if (fields[2] != "0" && fields[2] != "1")
      throw Error("BadManifest", "line " + std::to_string(lineno) + ": label must be 0 or 1");
    row.label = fields[2] == "1" ? 1 : 0;
    row.fold = fields[3];
    if (row.fold != "test") {
      if (row.fold.size() != 1 || row.fold[0] < '1' || row.fold[0] > '5')
        throw Error("BadManifest",
                    "line " + std::to_string(lineno) + ": fold must be 1..5 or 'test'");
    }
    if (!seen.insert(row.clip_id).second)
      throw Error("BadManifest", "duplicate clip_id '" + row.clip_id + "'");
    m.rows.push_back(std::move(row));
  }
  if (m.rows.empty()) throw Error("BadManifest", "manifest has no rows");
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ostringstream ss;
  ss << "clip_id,path,label,fold\n";
  for (const auto& r : m.rows)
    ss << r.clip_id << "," << r.path << "," << r.label << "," << r.fold << "\n";
  atomic_write_file(path, ss.str());
}

std::vector<train::FoldSpec> build_fold_specs(const Manifest& m, int n_folds) {
  if (n_folds < 1 || n_folds > 5) throw Error("BadConfig", "fold count must be in 1..5");
  std::vector<train::FoldSpec> specs;
  for (int k = 1; k <= n_folds; ++k) {
    train::FoldSpec spec;
    spec.fold_id = k;
    const std::string fold_str = std::to_string(k);
    for (const auto& r : m.rows) {
      if (r.is_test()) continue;
      (r.fold == fold_str ? spec.val_ids : spec.train_ids).push_back(r.clip_id);
    }
    if (spec.val_ids.empty() || spec.train_ids.empty())
      throw Error("BadManifest", "fold " + fold_str + " has an empty split");
    specs.push_back(std::move(spec));
  }
  return specs;
}

void write_provenance(const std::filesystem::path& path,
                      const std::vector<aug::Provenance>& records) {
  std::ostringstream ss;
  for (const auto& p : records) {
    nlohmann::json j{{"clip_id", p.clip_id}, {"anchor_id", p.anchor_id}, {"method", p.method},
                     {"seed", p.seed}};
    if (p.method == "spectrum") {
      j["neighbor_id"] = p.neighbor_id;
      j["lambda"] = p.lambda;
    } else if (p.method == "noise") {
      j["snr_db"] = p.snr_db;
    } else if (p.method == "vtlp") {
      j["alpha"] = p.alpha;
    }
    ss << j.dump() << "\n";
  }
  atomic_write_file(path, ss.str());
}

std::vector<aug::Provenance> read_provenance(const std::filesystem::path& path) {
  std::istringstream ss(read_file(path));
  std::vector<aug::Provenance> out;
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("Corrupt", "provenance line: " + std::string(e.what()));
    }
    aug::Provenance p;
    p.clip_id = j.at("clip_id").get<std::string>();
    p.anchor_id = j.at("anchor_id").get<std::string>();
    p.method = j.at("method").get<std::string>();
    p.seed = j.value("seed", 0ull);
    p.neighbor_id = j.value("neighbor_id", "");
    p.lambda = j.value("lambda", 0.0);
    p.snr_db = j.value("snr_db", 0.0);
    p.alpha = j.value("alpha", 0.0);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace cough
