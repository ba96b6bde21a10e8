#include "teacher_file.hpp"

#include <cmath>
#include <cstring>
#include <unordered_set>

#include "byte_io.hpp"
#include "error.hpp"
#include "image_io.hpp"

namespace latentsearch::teacher {

namespace {
constexpr char kMagic[4] = {'L', 'I', 'C', 'E'};
}

std::vector<uint8_t> TeacherFile::serialize() const {
  require(dim >= 1, ErrorCode::kInvalidArgument, "teacher file dim must be positive");
  std::vector<uint8_t> out;
  ByteWriter w(out);
  w.bytes(std::span(reinterpret_cast<const uint8_t*>(kMagic), 4));
  w.put<uint32_t>(static_cast<uint32_t>(entries.size()));
  w.put<uint32_t>(dim);
  for (const auto& e : entries) {
    require(e.name.size() <= 0xFFFF, ErrorCode::kInvalidArgument, "teacher entry name too long");
    require(e.values.size() == dim, ErrorCode::kShapeMismatch,
            "teacher entry '" + e.name + "' has " + std::to_string(e.values.size()) + " values, expected " +
                std::to_string(dim));
    w.put<uint16_t>(static_cast<uint16_t>(e.name.size()));
    w.text(e.name);
    for (float v : e.values) w.put<float>(v);
  }
  return out;
}

TeacherFile TeacherFile::parse(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, "teacher file");
  const auto magic = r.bytes(4);
  require(std::memcmp(magic.data(), kMagic, 4) == 0, ErrorCode::kBadMagic, "teacher file: bad magic");
  const uint32_t count = r.get<uint32_t>();
  TeacherFile file;
  file.dim = r.get<uint32_t>();
  require(file.dim >= 1, ErrorCode::kCorruptStream, "teacher file: dim is zero");
  std::unordered_set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    TeacherEntry e;
    const uint16_t len = r.get<uint16_t>();
    const auto name = r.bytes(len);
    e.name.assign(name.begin(), name.end());
    require(seen.insert(e.name).second, ErrorCode::kCorruptStream, "teacher file: duplicate name '" + e.name + "'");
    e.values.resize(file.dim);
    for (auto& v : e.values) {
      v = r.get<float>();
      require(std::isfinite(v), ErrorCode::kCorruptStream, "teacher file: non-finite value in '" + e.name + "'");
    }
    file.entries.push_back(std::move(e));
  }
  require(r.remaining() == 0, ErrorCode::kCorruptStream, "teacher file: trailing bytes");
  return file;
}

void TeacherFile::save(const std::filesystem::path& path) const {
  image_io::write_file(path, serialize());
}

TeacherFile TeacherFile::load(const std::filesystem::path& path) {
  return parse(image_io::read_file(path));
}

const TeacherEntry* TeacherFile::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

}  // namespace latentsearch::teacher
