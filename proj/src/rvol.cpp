#include "mdgru/rvol.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace mdgru {

namespace {

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::vector<unsigned char>& out, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::vector<unsigned char>& buf;
  int64_t off = 0;
  const std::string& path;

  void need(int64_t n, const char* what) {
    if (off + n > static_cast<int64_t>(buf.size())) {
      throw_format(path + ": truncated " + what + " at byte offset " + std::to_string(off) +
                   " (need " + std::to_string(n) + " bytes, have " +
                   std::to_string(static_cast<int64_t>(buf.size()) - off) + ")");
    }
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[static_cast<size_t>(off + i)]) << (8 * i);
    off += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[static_cast<size_t>(off + i)]) << (8 * i);
    off += 8;
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
};

}  // namespace

Volume Volume::zeros(std::array<int64_t, 3> extents, std::array<double, 3> spacing,
                     VoxelType dtype) {
  Volume v;
  v.extents = extents;
  v.spacing = spacing;
  v.dtype = dtype;
  v.validate();
  v.data.assign(static_cast<size_t>(v.size()), 0.0);
  return v;
}

void Volume::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (extents[static_cast<size_t>(a)] < 1) {
      throw_shape("volume: extents must be positive, got " +
                  std::to_string(extents[static_cast<size_t>(a)]) + " on axis " + std::to_string(a));
    }
    if (!(spacing[static_cast<size_t>(a)] > 0)) {
      throw_shape("volume: spacing must be > 0 on axis " + std::to_string(a));
    }
  }
  if (!data.empty() && static_cast<int64_t>(data.size()) != size()) {
    throw_shape("volume: data length " + std::to_string(data.size()) + " vs extents product " +
                std::to_string(size()));
  }
}

const char* space_name(Space s) {
  switch (s) {
    case Space::original: return "original";
    case Space::padded: return "padded";
    case Space::coarse_grid: return "coarse-grid";
    case Space::window: return "window";
  }
  return "?";
}

Volume read_volume(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw_error(ErrorKind::Runtime, "cannot open volume file: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  Reader r{buf, 0, path};

  r.need(4, "magic");
  if (std::memcmp(buf.data(), "RVOL", 4) != 0) {
    throw_format(path + ": bad magic at byte offset 0 (expected \"RVOL\")");
  }
  r.off = 4;
  const uint32_t version = r.u32("version");
  if (version != kRVolVersion) {
    throw_format(path + ": unsupported version " + std::to_string(version) +
                 " at byte offset 4 (expected " + std::to_string(kRVolVersion) + ")");
  }
  Volume v;
  for (int a = 0; a < 3; ++a) {
    const uint32_t d = r.u32("dims");
    if (d == 0) throw_format(path + ": zero extent at byte offset " + std::to_string(r.off - 4));
    v.extents[static_cast<size_t>(a)] = d;
  }
  for (int a = 0; a < 3; ++a) {
    v.spacing[static_cast<size_t>(a)] = r.f64("spacing");
    if (!(v.spacing[static_cast<size_t>(a)] > 0)) {
      throw_format(path + ": non-positive spacing at byte offset " + std::to_string(r.off - 8));
    }
  }
  const uint32_t dt = r.u32("dtype");
  if (dt > 1) {
    throw_format(path + ": unknown dtype code " + std::to_string(dt) + " at byte offset " +
                 std::to_string(r.off - 4));
  }
  v.dtype = static_cast<VoxelType>(dt);

  const int64_t n = v.size();
  const int64_t elem = v.dtype == VoxelType::f32 ? 4 : 8;
  const int64_t expected = n * elem;
  const int64_t have = static_cast<int64_t>(buf.size()) - r.off;
  if (have != expected) {
    throw_format(path + ": payload length " + std::to_string(have) + " at byte offset " +
                 std::to_string(r.off) + " (expected " + std::to_string(expected) + " = " +
                 std::to_string(n) + " voxels x " + std::to_string(elem) + " bytes)");
  }
  v.data.resize(static_cast<size_t>(n));
  if (v.dtype == VoxelType::f32) {
    for (int64_t i = 0; i < n; ++i) {
      uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<uint32_t>(buf[static_cast<size_t>(r.off + 4 * i + b)]) << (8 * b);
      }
      float fv;
      std::memcpy(&fv, &bits, 4);
      v.data[static_cast<size_t>(i)] = static_cast<double>(fv);
    }
  } else {
    Reader pr{buf, r.off, path};
    for (int64_t i = 0; i < n; ++i) v.data[static_cast<size_t>(i)] = pr.f64("payload");
  }
  return v;
}

void write_volume(const Volume& v, const std::string& path) {
  v.validate();
  if (static_cast<int64_t>(v.data.size()) != v.size()) {
    throw_shape("write_volume: volume has no data");
  }
  std::vector<unsigned char> buf;
  buf.reserve(static_cast<size_t>(kRVolHeaderBytes + v.size() * 8));
  buf.insert(buf.end(), {'R', 'V', 'O', 'L'});
  put_u32(buf, kRVolVersion);
  for (int a = 0; a < 3; ++a) put_u32(buf, static_cast<uint32_t>(v.extents[static_cast<size_t>(a)]));
  for (int a = 0; a < 3; ++a) put_f64(buf, v.spacing[static_cast<size_t>(a)]);
  put_u32(buf, static_cast<uint32_t>(v.dtype));
  if (v.dtype == VoxelType::f32) {
    for (double d : v.data) {
      const float fv = static_cast<float>(d);
      uint32_t bits;
      std::memcpy(&bits, &fv, 4);
      for (int b = 0; b < 4; ++b) buf.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xFF));
    }
  } else {
    for (double d : v.data) put_f64(buf, d);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw_error(ErrorKind::Runtime, "cannot write volume file: " + path);
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw_error(ErrorKind::Runtime, "short write to volume file: " + path);
}

}  // namespace mdgru
