#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "lfd/trace.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Unique scratch directory, removed on destruction.
struct TempDir {
  fs::path path;

  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("lfd_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Minimal single-object frame for hand-built traces.
inline lfd::Frame make_frame(int index, double time, const lfd::Vec3& tip,
                             const lfd::Vec3& object_centroid, const std::string& label = "unpeeled",
                             int object_id = 0) {
  lfd::Frame f;
  f.index = index;
  f.time = time;
  f.hand_tip = tip;
  f.hand = tip + lfd::Vec3(0, 0, 0.055);
  f.wrist = tip + lfd::Vec3(-0.05, 0, 0.115);
  lfd::ObjectRecord rec;
  rec.object_id = object_id;
  rec.centroid = object_centroid;
  rec.state.label = label;
  f.objects.push_back(rec);
  return f;
}

}  // namespace testutil
