#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace groundnet {

namespace {

constexpr char kMagic[4] = {'G', 'N', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_f64(std::ostream& os, double x) {
  uint64_t v = std::bit_cast<uint64_t>(x);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("checkpoint: truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

std::string get_string(std::istream& is) {
  const uint32_t len = get_u32(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw IoError("checkpoint: truncated string");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind,
                     const std::string& config_json,
                     const ParamStore& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open '" + path + "' for write");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_string(os, kind);
  put_string(os, config_json);
  put_u32(os, static_cast<uint32_t>(params.size()));
  for (int i = 0; i < params.size(); ++i) {
    const ParamTensor& t = params[i];
    put_string(os, t.name);
    put_u32(os, static_cast<uint32_t>(t.shape.rank()));
    for (int d : t.shape.d) put_u32(os, static_cast<uint32_t>(d));
    for (double x : t.data) put_f64(os, x);
  }
  if (!os) throw IoError("checkpoint: write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("checkpoint: bad magic in '" + path + "'");
  }
  LoadedCheckpoint out;
  out.version = get_u32(is);
  if (out.version != kVersion) {
    throw IoError("checkpoint: unsupported version " +
                  std::to_string(out.version));
  }
  out.kind = get_string(is);
  out.config_json = get_string(is);
  const uint32_t count = get_u32(is);
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(is);
    const uint32_t rank = get_u32(is);
    std::vector<int> dims(rank);
    for (uint32_t d = 0; d < rank; ++d) {
      dims[d] = static_cast<int>(get_u32(is));
    }
    const int id = out.params.add(name, Shape(dims));
    ParamTensor& t = out.params[id];
    for (size_t j = 0; j < t.data.size(); ++j) t.data[j] = get_f64(is);
  }
  return out;
}

}  // namespace groundnet
