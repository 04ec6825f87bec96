#include "mdgru/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace mdgru {

Landmark read_landmark(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw_error(ErrorKind::Runtime, "cannot open landmark file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t i = line.find_first_not_of(" \t\r");
    if (i == std::string::npos || line[i] == '#') continue;
    std::istringstream ss(line);
    Landmark lm;
    lm.space = Space::original;
    for (int a = 0; a < 3; ++a) {
      if (!(ss >> lm.pos[static_cast<size_t>(a)])) {
        throw_parse(path + ":" + std::to_string(lineno) +
                    ": expected three numeric coordinates, got \"" + line + "\"");
      }
    }
    std::string extra;
    if (ss >> extra) {
      throw_parse(path + ":" + std::to_string(lineno) + ": trailing token \"" + extra +
                  "\" after three coordinates");
    }
    return lm;
  }
  throw_parse(path + ": no coordinate line found");
}

void write_landmark(const Landmark& lm, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_error(ErrorKind::Runtime, "cannot write landmark file: " + path);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", lm.pos[0], lm.pos[1], lm.pos[2]);
  f << buf;
}

DatasetManifest DatasetManifest::read(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw_error(ErrorKind::Runtime, "cannot open manifest: " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&base](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  DatasetManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) {
      throw_parse(path + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields, got " +
                  std::to_string(fields.size()));
    }
    m.entries.push_back(
        ManifestEntry{fields[0], resolve(fields[1]), resolve(fields[2]), fields[3]});
  }
  m.validate();
  return m;
}

void DatasetManifest::write(const std::string& path) const {
  validate();
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw_error(ErrorKind::Runtime, "cannot write manifest: " + path);
  for (const ManifestEntry& e : entries) {
    f << e.subject_id << '\t' << e.volume_path << '\t' << e.landmark_path << '\t' << e.split
      << '\n';
  }
}

void DatasetManifest::validate() const {
  std::map<std::string, std::string> subject_split;
  for (const ManifestEntry& e : entries) {
    if (e.split != "train" && e.split != "validation" && e.split != "test") {
      throw_parse("manifest: unknown split \"" + e.split + "\" for subject " + e.subject_id);
    }
    auto [it, inserted] = subject_split.emplace(e.subject_id, e.split);
    if (!inserted && it->second != e.split) {
      throw_parse("manifest: subject " + e.subject_id + " appears in splits \"" + it->second +
                  "\" and \"" + e.split + "\"");
    }
  }
}

std::vector<ManifestEntry> DatasetManifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : entries) {
    if (e.split == name) out.push_back(e);
  }
  return out;
}

}  // namespace mdgru
