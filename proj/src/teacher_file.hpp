#pragma once

// Teacher-embedding file ("LICE"), produced by the trainer and read by eval.
//
// Layout, little-endian:
//   magic "LICE" | count u32 | D u32 | count x { name_len u16 | name | D x f32 }

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace latentsearch::teacher {

struct TeacherEntry {
  std::string name;
  std::vector<float> values;

  friend bool operator==(const TeacherEntry&, const TeacherEntry&) = default;
};

struct TeacherFile {
  uint32_t dim = 0;
  std::vector<TeacherEntry> entries;

  std::vector<uint8_t> serialize() const;
  static TeacherFile parse(std::span<const uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static TeacherFile load(const std::filesystem::path& path);

  /// nullptr when absent.
  const TeacherEntry* find(const std::string& name) const;
};

}  // namespace latentsearch::teacher
