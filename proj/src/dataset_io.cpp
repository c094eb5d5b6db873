#include "dataset_io.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

namespace groundnet {

using nlohmann::json;

namespace {

json grid_to_json(const std::vector<int>& grid, int m, int n) {
  json rows = json::array();
  for (int r = 0; r < m; ++r) {
    json row = json::array();
    for (int c = 0; c < n; ++c) row.push_back(grid[r * n + c]);
    rows.push_back(std::move(row));
  }
  return rows;
}

json values_to_json(const std::vector<double>& v, int m, int n) {
  json rows = json::array();
  for (int r = 0; r < m; ++r) {
    json row = json::array();
    for (int c = 0; c < n; ++c) row.push_back(v[r * n + c]);
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
std::vector<T> grid_from_json(const json& rows, int& m, int& n) {
  m = static_cast<int>(rows.size());
  n = static_cast<int>(rows.at(0).size());
  std::vector<T> out;
  out.reserve(static_cast<size_t>(m) * n);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != n) {
      throw IoError("dataset: ragged grid row");
    }
    for (const auto& x : row) out.push_back(x.get<T>());
  }
  return out;
}

}  // namespace

void write_pw_dataset(const std::string& path,
                      const std::vector<InstructionSample>& samples) {
  std::ofstream os(path);
  if (!os) throw IoError("dataset: cannot write '" + path + "'");
  for (const auto& s : samples) {
    json j;
    j["terrain"] = grid_to_json(s.world.terrain, s.world.m, s.world.n);
    j["objects"] = grid_to_json(s.world.objects, s.world.m, s.world.n);
    j["goal"] = {s.world.goal.r, s.world.goal.c};
    j["start"] = {s.world.start.r, s.world.start.c};
    j["text"] = s.text;
    j["kind"] = instruction_kind_name(s.kind);
    j["values"] = values_to_json(s.oracle_values.v, s.world.m, s.world.n);
    os << j.dump() << "\n";
  }
}

std::vector<InstructionSample> read_pw_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("dataset: cannot open '" + path + "'");
  std::vector<InstructionSample> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    InstructionSample s;
    int m = 0, n = 0;
    s.world.terrain = grid_from_json<int>(j.at("terrain"), m, n);
    s.world.m = m;
    s.world.n = n;
    int m2 = 0, n2 = 0;
    s.world.objects = grid_from_json<int>(j.at("objects"), m2, n2);
    s.world.goal = {j.at("goal").at(0).get<int>(), j.at("goal").at(1).get<int>()};
    s.world.start = {j.at("start").at(0).get<int>(),
                     j.at("start").at(1).get<int>()};
    s.text = j.at("text").get<std::string>();
    s.kind = instruction_kind_from_name(j.at("kind").get<std::string>());
    s.oracle_values.m = m;
    s.oracle_values.n = n;
    int m3 = 0, n3 = 0;
    s.oracle_values.v = grid_from_json<double>(j.at("values"), m3, n3);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

void put_f64_le(std::ostream& os, double x) {
  const uint64_t v = std::bit_cast<uint64_t>(x);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

double get_f64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("dataset: truncated image payload");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void write_sw_dataset(const std::string& jsonl_path,
                      const std::string& images_path,
                      const std::vector<SwSample>& samples) {
  std::ofstream os(jsonl_path);
  if (!os) throw IoError("dataset: cannot write '" + jsonl_path + "'");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("dataset: cannot write '" + images_path + "'");
  int index = 0;
  for (const auto& s : samples) {
    json j;
    j["caption"] = s.caption.caption;
    j["label"] = s.caption.label ? 1 : 0;
    j["image_index"] = index;
    j["image_size"] = s.scene.image_size;
    json shapes = json::array();
    for (const auto& sp : s.scene.shapes) {
      shapes.push_back({{"kind", shape_kind_names()[sp.kind]},
                        {"color", shape_color_names()[sp.color]},
                        {"cx", sp.cx},
                        {"cy", sp.cy},
                        {"size", sp.size}});
    }
    j["shapes"] = std::move(shapes);
    os << j.dump() << "\n";
    for (double x : s.scene.image) put_f64_le(img, x);
    ++index;
  }
}

std::vector<SwSample> read_sw_dataset(const std::string& jsonl_path,
                                      const std::string& images_path) {
  std::ifstream is(jsonl_path);
  if (!is) throw IoError("dataset: cannot open '" + jsonl_path + "'");
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("dataset: cannot open '" + images_path + "'");

  auto kind_id = [](const std::string& name) {
    const auto& names = shape_kind_names();
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    throw IoError("dataset: unknown shape kind '" + name + "'");
  };
  auto color_id = [](const std::string& name) {
    const auto& names = shape_color_names();
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    throw IoError("dataset: unknown color '" + name + "'");
  };

  std::vector<SwSample> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    SwSample s;
    s.caption.caption = j.at("caption").get<std::string>();
    s.caption.label = j.at("label").get<int>() != 0;
    s.scene.image_size = j.at("image_size").get<int>();
    for (const auto& sp : j.at("shapes")) {
      ShapeSpec spec;
      spec.kind = kind_id(sp.at("kind").get<std::string>());
      spec.color = color_id(sp.at("color").get<std::string>());
      spec.cx = sp.at("cx").get<double>();
      spec.cy = sp.at("cy").get<double>();
      spec.size = sp.at("size").get<double>();
      s.scene.shapes.push_back(spec);
    }
    const size_t count =
        static_cast<size_t>(s.scene.image_size) * s.scene.image_size * 3;
    s.scene.image.resize(count);
    for (size_t i = 0; i < count; ++i) s.scene.image[i] = get_f64_le(img);
    out.push_back(std::move(s));
  }
  return out;
}

uint64_t file_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("hash: cannot open '" + path + "'");
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const std::streamsize n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!is) break;
  }
  return h;
}

}  // namespace groundnet
