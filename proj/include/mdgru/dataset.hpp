// Landmark text files and the tab-separated dataset manifest.
#pragma once

#include <string>
#include <vector>

#include "mdgru/volume.hpp"

namespace mdgru {

// One line "x y z" in original-space voxel coordinates; '#' lines and blank
// lines are skipped. Written with 17 significant digits so values round-trip.
Landmark read_landmark(const std::string& path);
void write_landmark(const Landmark& lm, const std::string& path);

struct ManifestEntry {
  std::string subject_id;
  std::string volume_path;
  std::string landmark_path;
  std::string split;  // train | validation | test
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  // Reads `subject<TAB>volume<TAB>landmark<TAB>split` lines; relative paths
  // are resolved against the manifest's directory; validates on load.
  static DatasetManifest read(const std::string& path);
  void write(const std::string& path) const;

  // Split names legal and every subject confined to a single split.
  void validate() const;
  std::vector<ManifestEntry> split(const std::string& name) const;
};

}  // namespace mdgru
