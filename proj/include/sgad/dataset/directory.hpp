#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "sgad/dataset/sample.hpp"
#include "sgad/image_io.hpp"

namespace sgad::data {

namespace fs = std::filesystem;

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

struct ManifestEntry {
  std::string id;
  std::string path;  // relative to the dataset root
  int label = 0;
};

inline const char* subtree_for(bool train, int label) {
  if (train) return "train/normal";
  return label == 0 ? "test/normal" : "test/diseased";
}

// Image files in one directory, sorted by file name.
inline std::vector<fs::path> list_images(const fs::path& dir) {
  SGAD_REQUIRE(fs::is_directory(dir), IoError, "missing directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return files;
}

inline std::vector<Sample> load_subtree(const fs::path& dir, int label) {
  std::vector<Sample> out;
  for (const auto& f : list_images(dir)) {
    Sample s;
    try {
      s.image = read_image(f);
    } catch (const Error& e) {
      throw IoError("unreadable image " + f.string() + ": " + e.what());
    }
    s.label = label;
    s.id = f.stem().string();
    out.push_back(std::move(s));
  }
  SGAD_REQUIRE(!out.empty(), IoError, "no images in " + dir.string());
  return out;
}

// Reads train/normal, test/normal and test/diseased. A train/diseased subtree
// is rejected because training must see normal samples only.
inline DatasetSplit load_directory(const fs::path& root) {
  SGAD_REQUIRE(fs::is_directory(root), IoError, "dataset directory not found: " + root.string());
  SGAD_REQUIRE(!fs::exists(root / "train" / "diseased"), InvalidArgument,
               "training data must be normal only, found " + (root / "train" / "diseased").string());
  DatasetSplit d;
  d.train = load_subtree(root / "train" / "normal", 0);
  d.test = load_subtree(root / "test" / "normal", 0);
  auto diseased = load_subtree(root / "test" / "diseased", 1);
  d.test.insert(d.test.end(), diseased.begin(), diseased.end());
  return d;
}

// Test split only (normal then diseased).
inline std::vector<Sample> load_test_directory(const fs::path& root) {
  auto t = load_subtree(root / "test" / "normal", 0);
  auto d = load_subtree(root / "test" / "diseased", 1);
  t.insert(t.end(), d.begin(), d.end());
  return t;
}

inline void write_manifest(const fs::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream f(path, std::ios::binary);
  SGAD_REQUIRE(f.good(), IoError, "cannot write " + path.string());
  f << "id,path,label\n";
  for (const auto& e : entries) f << e.id << ',' << e.path << ',' << e.label << '\n';
  SGAD_REQUIRE(f.good(), IoError, "write failed: " + path.string());
}

// PNG per sample under the standard layout plus manifest.csv at the root.
inline std::vector<ManifestEntry> write_directory(const fs::path& root, const DatasetSplit& d) {
  std::vector<ManifestEntry> manifest;
  auto emit = [&](const Sample& s, bool train) {
    SGAD_REQUIRE(!(train && s.label != 0), InvalidArgument, "training sample " + s.id + " is not labelled normal");
    const std::string rel = std::string(subtree_for(train, s.label)) + "/" + s.id + ".png";
    fs::create_directories((root / rel).parent_path());
    write_png(s.image, root / rel);
    manifest.push_back({s.id, rel, s.label});
  };
  for (const auto& s : d.train) emit(s, true);
  for (const auto& s : d.test) emit(s, false);
  write_manifest(root / "manifest.csv", manifest);
  return manifest;
}

}  // namespace sgad::data
