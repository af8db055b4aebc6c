#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cough/augment.hpp"
#include "cough/training.hpp"

namespace cough {

// One dataset row: `clip_id,path,label,fold` with fold in 1..5 or "test".
struct ManifestRow {
  std::string clip_id;
  std::string path;
  int label = 0;
  std::string fold;

  bool is_test() const { return fold == "test"; }
};

struct Manifest {
  std::vector<ManifestRow> rows;

  const ManifestRow* find(const std::string& clip_id) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

// Fold k validates on rows with fold == k and trains on the remaining
// non-test rows.
std::vector<train::FoldSpec> build_fold_specs(const Manifest& m, int n_folds);

// Line-delimited provenance records for augmented clips.
void write_provenance(const std::filesystem::path& path,
                      const std::vector<aug::Provenance>& records);
std::vector<aug::Provenance> read_provenance(const std::filesystem::path& path);

}  // namespace cough
