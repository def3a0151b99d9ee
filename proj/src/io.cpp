#include "edgetrack/io.hpp"

#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace edgetrack {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::uint16_t u16() {
    need(2);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    need(4);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 4;
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  void expect_end() const {
    if (pos_ != bytes_.size())
      throw Error(what_ + ": " + std::to_string(bytes_.size() - pos_) + " trailing bytes at offset " +
                  std::to_string(pos_));
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(what_ + ": " + msg + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw Error(what_ + ": truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                  " more)");
  }
  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s.empty()) throw Error(where + ": empty number");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw Error(where + ": bad number '" + s + "'");
  return v;
}

long parse_int(const std::string& s, const std::string& where) {
  if (s.empty()) throw Error(where + ": empty integer");
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) throw Error(where + ": bad integer '" + s + "'");
  return v;
}

constexpr std::size_t kPoseLogColumns = 20;

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw Error("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GrayImage decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  const auto fail = [&](const std::string& msg) -> void {
    throw Error("PGM: " + msg + " at byte " + std::to_string(pos));
  };
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto number = [&] {
    skip_space();
    const std::size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) fail("header value too large");
      ++pos;
    }
    if (pos == start) fail("expected a number");
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail("missing P5 magic");
  pos = 2;
  const int w = number();
  const int h = number();
  const int maxval = number();
  if (w <= 0 || h <= 0) fail("non-positive size");
  if (maxval != 255) fail("maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) fail("expected whitespace");
  ++pos;
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos != n)
    fail("pixel data size " + std::to_string(bytes.size() - pos) + " != " + std::to_string(n));
  GrayImage img(h, w);
  for (std::size_t i = 0; i < n; ++i)
    img.data()[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i])) / 255.0f;
  return img;
}

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n255\n";
  const auto n = static_cast<std::size_t>(img.size());
  out.reserve(out.size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const float v = std::clamp(img.data()[i], 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
  }
  return out;
}

GrayImage read_pgm(const fs::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_pgm(const fs::path& path, const GrayImage& img) { write_file_atomic(path, encode_pgm(img)); }

MeshData decode_obj(const std::string& text) {
  MeshData d;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<std::array<long, 3>> faces;
  std::vector<int> face_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    const std::string where = "OBJ line " + std::to_string(line_no);
    if (tag == "v") {
      std::string a, b, c;
      if (!(ls >> a >> b >> c)) throw Error(where + ": vertex needs three coordinates");
      d.vertices.emplace_back(parse_double(a, where), parse_double(b, where), parse_double(c, where));
    } else if (tag == "f") {
      std::vector<std::string> idx;
      std::string tok;
      while (ls >> tok) idx.push_back(tok.substr(0, tok.find('/')));
      if (idx.size() != 3) throw Error(where + ": only triangles are supported");
      faces.push_back({parse_int(idx[0], where), parse_int(idx[1], where), parse_int(idx[2], where)});
      face_lines.push_back(line_no);
    }
  }
  for (std::size_t i = 0; i < faces.size(); ++i) {
    Triangle t{};
    for (int k = 0; k < 3; ++k) {
      const long v = faces[i][static_cast<std::size_t>(k)];
      if (v < 1 || v > static_cast<long>(d.vertices.size()))
        throw Error("OBJ line " + std::to_string(face_lines[i]) + ": vertex index " + std::to_string(v) +
                    " out of range");
      t[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(v - 1);
    }
    d.triangles.push_back(t);
  }
  return d;
}

std::string encode_obj(const MeshData& data) {
  std::string out;
  char buf[128];
  for (const auto& v : data.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& t : data.triangles) {
    std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out += buf;
  }
  return out;
}

MeshData decode_msh(const std::string& bytes) {
  ByteReader r(bytes, "MSH");
  if (r.take(4) != "MSH1") throw Error("MSH: bad magic");
  const std::uint32_t nv = r.u32();
  const std::uint32_t nt = r.u32();
  if (bytes.size() != 12 + 12ull * nv + 12ull * nt)
    throw Error("MSH: size " + std::to_string(bytes.size()) + " does not match counts");
  MeshData d;
  d.vertices.reserve(nv);
  for (std::uint32_t i = 0; i < nv; ++i) {
    const float x = r.f32(), y = r.f32(), z = r.f32();
    d.vertices.emplace_back(x, y, z);
  }
  for (std::uint32_t i = 0; i < nt; ++i) {
    Triangle t{r.u32(), r.u32(), r.u32()};
    for (auto v : t)
      if (v >= nv) r.fail("vertex index " + std::to_string(v) + " out of range");
    d.triangles.push_back(t);
  }
  r.expect_end();
  return d;
}

std::string encode_msh(const MeshData& data) {
  std::string out = "MSH1";
  put_u32(out, static_cast<std::uint32_t>(data.vertices.size()));
  put_u32(out, static_cast<std::uint32_t>(data.triangles.size()));
  for (const auto& v : data.vertices)
    for (int k = 0; k < 3; ++k) put_f32(out, static_cast<float>(v[k]));
  for (const auto& t : data.triangles)
    for (auto i : t) put_u32(out, i);
  return out;
}

Mesh load_mesh(const fs::path& path) {
  try {
    const std::string bytes = read_file(path);
    MeshData d = path.extension() == ".msh" ? decode_msh(bytes) : decode_obj(bytes);
    return make_mesh(std::move(d.vertices), std::move(d.triangles));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_mesh(const fs::path& path, const Mesh& mesh) {
  const MeshData d{mesh.vertices, mesh.triangles};
  write_file_atomic(path, path.extension() == ".msh" ? encode_msh(d) : encode_obj(d));
}

CorrespondenceFrame decode_vff(const std::string& bytes) {
  ByteReader r(bytes, "VFF");
  if (r.take(4) != "VFF1") throw Error("VFF: bad magic");
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint16_t k = r.u16();
  const std::uint16_t n_classes = r.u16();
  if (w == 0 || h == 0 || w > 65536 || h > 65536) throw Error("VFF: invalid size");
  const std::uint64_t px = static_cast<std::uint64_t>(w) * h;
  const std::uint64_t expected = 16 + 2 * px + 8 * px * k;
  if (bytes.size() != expected)
    throw Error("VFF: size " + std::to_string(bytes.size()) + " != expected " + std::to_string(expected));
  CorrespondenceFrame f = CorrespondenceFrame::Empty(static_cast<int>(w), static_cast<int>(h), k, n_classes);
  for (std::uint64_t i = 0; i < px; ++i) f.class_mask.data()[i] = r.u16();
  for (std::size_t j = 0; j < k; ++j) {
    for (auto* plane : {&f.vx[j], &f.vy[j]}) {
      for (std::uint64_t i = 0; i < px; ++i) {
        const float v = r.f32();
        if (!std::isfinite(v)) r.fail("non-finite field value");
        plane->data()[i] = v;
      }
    }
  }
  return f;
}

std::string encode_vff(const CorrespondenceFrame& f) {
  if (f.k() > 0xFFFF || f.n_classes > 0xFFFF || f.n_classes < 0) throw Error("VFF: counts exceed u16");
  std::string out = "VFF1";
  put_u32(out, static_cast<std::uint32_t>(f.width));
  put_u32(out, static_cast<std::uint32_t>(f.height));
  put_u16(out, static_cast<std::uint16_t>(f.k()));
  put_u16(out, static_cast<std::uint16_t>(f.n_classes));
  const auto px = static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height);
  out.reserve(out.size() + 2 * px + 8 * px * static_cast<std::size_t>(f.k()));
  for (std::size_t i = 0; i < px; ++i) put_u16(out, f.class_mask.data()[i]);
  for (std::size_t j = 0; j < f.vx.size(); ++j) {
    for (std::size_t i = 0; i < px; ++i) {
      if (!std::isfinite(f.vx[j].data()[i])) throw Error("VFF: non-finite field value");
      put_f32(out, f.vx[j].data()[i]);
    }
    for (std::size_t i = 0; i < px; ++i) {
      if (!std::isfinite(f.vy[j].data()[i])) throw Error("VFF: non-finite field value");
      put_f32(out, f.vy[j].data()[i]);
    }
  }
  return out;
}

CorrespondenceFrame read_vff(const fs::path& path) {
  try {
    return decode_vff(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_vff(const fs::path& path, const CorrespondenceFrame& frame) {
  write_file_atomic(path, encode_vff(frame));
}

std::string pose_log_header() {
  return "frame,object_id,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,e_irls,e_dist,e_valid,e_edge,state,"
         "detection_used";
}

std::string format_pose_log_row(const PoseLogRow& row) {
  std::string s = std::to_string(row.frame) + "," + std::to_string(row.object_id);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += "," + (row.pose ? format_double(row.pose->rotation(i, j)) : std::string());
  for (int i = 0; i < 3; ++i) s += "," + (row.pose ? format_double(row.pose->translation[i]) : std::string());
  if (row.score) {
    for (double v : {row.score->e_irls, row.score->e_dist, row.score->e_valid, row.score->e_edge})
      s += "," + format_double(v);
  } else {
    s += ",,,,";
  }
  s += "," + row.state + "," + (row.detection_used ? "1" : "0");
  return s;
}

std::string encode_pose_log(const std::vector<PoseLogRow>& rows) {
  std::string out = pose_log_header() + "\n";
  for (const auto& r : rows) out += format_pose_log_row(r) + "\n";
  return out;
}

std::vector<PoseLogRow> decode_pose_log(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line)) throw Error("pose log: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != pose_log_header()) throw Error("pose log line 1: unexpected header");
  std::vector<PoseLogRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "pose log line " + std::to_string(line_no);
    const auto f = split(line, ',');
    if (f.size() != kPoseLogColumns)
      throw Error(where + ": expected " + std::to_string(kPoseLogColumns) + " fields, got " +
                  std::to_string(f.size()));
    PoseLogRow r;
    r.frame = static_cast<int>(parse_int(f[0], where));
    r.object_id = static_cast<int>(parse_int(f[1], where));
    const bool has_pose = !f[2].empty();
    for (std::size_t i = 3; i < 14; ++i)
      if (f[i].empty() == has_pose) throw Error(where + ": pose fields partially empty");
    if (has_pose) {
      Pose p;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) p.rotation(i, j) = parse_double(f[static_cast<std::size_t>(2 + 3 * i + j)], where);
      for (int i = 0; i < 3; ++i) p.translation[i] = parse_double(f[static_cast<std::size_t>(11 + i)], where);
      r.pose = p;
    }
    const bool has_score = !f[14].empty();
    for (std::size_t i = 15; i < 18; ++i)
      if (f[i].empty() == has_score) throw Error(where + ": score fields partially empty");
    if (has_score)
      r.score = EdgeScore{parse_double(f[14], where), parse_double(f[15], where), parse_double(f[16], where),
                          parse_double(f[17], where)};
    r.state = f[18];
    if (f[19] != "0" && f[19] != "1") throw Error(where + ": detection_used must be 0 or 1");
    r.detection_used = f[19] == "1";
    rows.push_back(r);
  }
  return rows;
}

std::vector<PoseLogRow> read_pose_log(const fs::path& path) {
  try {
    return decode_pose_log(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_pose_log(const fs::path& path, const std::vector<PoseLogRow>& rows) {
  write_file_atomic(path, encode_pose_log(rows));
}

}  // namespace edgetrack
