#include "epigeo/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace epigeo {

// --- deterministic JSON ------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

JsonValue JsonValue::object() {
  JsonValue v;
  v.kind_ = Kind::object;
  return v;
}
JsonValue JsonValue::array() {
  JsonValue v;
  v.kind_ = Kind::array;
  return v;
}
JsonValue JsonValue::number(double x) {
  JsonValue v;
  v.kind_ = Kind::number;
  v.num_ = x;
  return v;
}
JsonValue JsonValue::integer(long long x) {
  JsonValue v;
  v.kind_ = Kind::integer;
  v.int_ = x;
  return v;
}
JsonValue JsonValue::boolean(bool x) {
  JsonValue v;
  v.kind_ = Kind::boolean;
  v.bool_ = x;
  return v;
}
JsonValue JsonValue::string(const std::string &x) {
  JsonValue v;
  v.kind_ = Kind::string;
  v.str_ = x;
  return v;
}
JsonValue JsonValue::null() { return {}; }

JsonValue &JsonValue::set(const std::string &key, JsonValue v) {
  members_.emplace_back(key, std::move(v));
  return *this;
}
JsonValue &JsonValue::push(JsonValue v) {
  items_.push_back(std::move(v));
  return *this;
}

namespace {

void write_escaped(std::string *out, const std::string &s) {
  out->push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': *out += "\\\""; break;
      case '\\': *out += "\\\\"; break;
      case '\n': *out += "\\n"; break;
      case '\t': *out += "\\t"; break;
      case '\r': *out += "\\r"; break;
      default: out->push_back(c);
    }
  }
  out->push_back('"');
}

}  // namespace

void JsonValue::write(std::string *out, int indent, int depth) const {
  const std::string pad(static_cast<size_t>(indent) * (depth + 1), ' ');
  const std::string close_pad(static_cast<size_t>(indent) * depth, ' ');
  switch (kind_) {
    case Kind::object: {
      if (members_.empty()) {
        *out += "{}";
        return;
      }
      *out += "{\n";
      for (size_t i = 0; i < members_.size(); ++i) {
        *out += pad;
        write_escaped(out, members_[i].first);
        *out += ": ";
        members_[i].second.write(out, indent, depth + 1);
        if (i + 1 < members_.size()) *out += ",";
        *out += "\n";
      }
      *out += close_pad + "}";
      return;
    }
    case Kind::array: {
      if (items_.empty()) {
        *out += "[]";
        return;
      }
      *out += "[\n";
      for (size_t i = 0; i < items_.size(); ++i) {
        *out += pad;
        items_[i].write(out, indent, depth + 1);
        if (i + 1 < items_.size()) *out += ",";
        *out += "\n";
      }
      *out += close_pad + "]";
      return;
    }
    case Kind::number: *out += format_double(num_); return;
    case Kind::integer: *out += std::to_string(int_); return;
    case Kind::boolean: *out += bool_ ? "true" : "false"; return;
    case Kind::string: write_escaped(out, str_); return;
    case Kind::null: *out += "null"; return;
  }
}

std::string JsonValue::dump(int indent) const {
  std::string out;
  write(&out, indent, 0);
  out += "\n";
  return out;
}

// --- text helpers ------------------------------------------------------------

void write_text_file(const std::string &path, const std::string &content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw Error(ErrorCode::io_error, "cannot open for writing: " + path);
  }
  f << content;
  if (!f) {
    throw Error(ErrorCode::io_error, "write failed: " + path);
  }
}

std::string read_text_file(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw Error(ErrorCode::io_error, "cannot open: " + path);
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// --- PNG ----------------------------------------------------------------------

namespace {

struct PngRows {
  std::vector<std::vector<png_byte>> rows;
  std::vector<png_bytep> ptrs;

  void allocate(int height, size_t row_bytes) {
    rows.assign(height, std::vector<png_byte>(row_bytes, 0));
    ptrs.resize(height);
    for (int y = 0; y < height; ++y) ptrs[y] = rows[y].data();
  }
};

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  PngRows data;
};

RawPng read_png_raw(const std::string &path) {
  FILE *fp = std::fopen(path.c_str(), "rb");
  if (fp == nullptr) {
    throw Error(ErrorCode::io_error, "cannot open: " + path);
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  RawPng out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::io_error, "PNG decode failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr,
               nullptr);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  out.bit_depth = png_get_bit_depth(png, info);
  out.channels = png_get_channels(png, info);
  out.data.allocate(out.height, png_get_rowbytes(png, info));
  png_read_image(png, out.data.ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return out;
}

void write_png_raw(const std::string &path, int width, int height, int channels,
                   int bit_depth, const PngRows &rows) {
  FILE *fp = std::fopen(path.c_str(), "wb");
  if (fp == nullptr) {
    throw Error(ErrorCode::io_error, "cannot open for writing: " + path);
  }
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::io_error, "PNG encode failed: " + path);
  }
  png_init_io(png, fp);
  const int color_type =
      channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytep *>(rows.ptrs.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

ImageBuffer read_image_png(const std::string &path) {
  const RawPng raw = read_png_raw(path);
  if (raw.bit_depth != 8) {
    throw Error(ErrorCode::io_error,
                "expected an 8-bit image PNG (depth maps use read_depth_png): " +
                    path);
  }
  if (raw.channels != 1 && raw.channels != 3) {
    throw Error(ErrorCode::io_error, "unsupported channel count in " + path);
  }
  ImageBuffer img = ImageBuffer::create(raw.width, raw.height, raw.channels);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      for (int c = 0; c < raw.channels; ++c) {
        img.at(x, y, c) = raw.data.rows[y][x * raw.channels + c] / 255.0;
      }
    }
  }
  return img;
}

void write_image_png(const std::string &path, const ImageBuffer &img) {
  PngRows rows;
  rows.allocate(img.height, static_cast<size_t>(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const double v = std::min(1.0, std::max(0.0, img.at(x, y, c)));
        rows.rows[y][x * img.channels + c] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
  }
  write_png_raw(path, img.width, img.height, img.channels, 8, rows);
}

void write_depth_png(const std::string &path, const DepthMap &depth,
                     double scale) {
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::invalid_input, "depth scale must be positive");
  }
  PngRows rows;
  rows.allocate(depth.height, static_cast<size_t>(depth.width) * 2);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      std::uint16_t raw = 0;
      if (depth.is_valid(x, y)) {
        const long long q = std::llround(depth.at(x, y) * scale);
        raw = static_cast<std::uint16_t>(std::min(65535LL, std::max(1LL, q)));
      }
      rows.rows[y][2 * x] = static_cast<png_byte>(raw >> 8);  // big-endian
      rows.rows[y][2 * x + 1] = static_cast<png_byte>(raw & 0xFF);
    }
  }
  write_png_raw(path, depth.width, depth.height, 1, 16, rows);

  JsonValue sidecar = JsonValue::object();
  sidecar.set("scale", JsonValue::number(scale));
  write_text_file(path + ".json", sidecar.dump());
}

DepthMap read_depth_png(const std::string &path) {
  const RawPng raw = read_png_raw(path);
  if (raw.bit_depth != 16 || raw.channels != 1) {
    throw Error(ErrorCode::io_error, "expected 16-bit grayscale depth PNG: " + path);
  }
  double scale = 256.0;
  try {
    const auto sidecar = nlohmann::json::parse(read_text_file(path + ".json"));
    scale = sidecar.at("scale").get<double>();
  } catch (const Error &) {
    throw Error(ErrorCode::io_error, "missing depth sidecar: " + path + ".json");
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::parse_error,
                "bad depth sidecar " + path + ".json: " + e.what());
  }
  DepthMap out = DepthMap::create(raw.width, raw.height);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const std::uint16_t v = static_cast<std::uint16_t>(
          (raw.data.rows[y][2 * x] << 8) | raw.data.rows[y][2 * x + 1]);
      if (v != 0) out.set(x, y, v / scale, true);
    }
  }
  return out;
}

// --- PFM ----------------------------------------------------------------------

void write_depth_pfm(const std::string &path, const DepthMap &depth) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw Error(ErrorCode::io_error, "cannot open for writing: " + path);
  }
  f << "Pf\n" << depth.width << " " << depth.height << "\n-1.0\n";
  // PFM stores rows bottom to top.
  for (int y = depth.height - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width; ++x) {
      const float v = depth.is_valid(x, y) ? static_cast<float>(depth.at(x, y)) : 0.0f;
      f.write(reinterpret_cast<const char *>(&v), sizeof(float));
    }
  }
  if (!f) {
    throw Error(ErrorCode::io_error, "write failed: " + path);
  }
}

DepthMap read_depth_pfm(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw Error(ErrorCode::io_error, "cannot open: " + path);
  }
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  f >> magic >> w >> h >> scale;
  if (magic != "Pf" || w <= 0 || h <= 0 || scale == 0.0) {
    throw Error(ErrorCode::parse_error, "not a grayscale PFM: " + path);
  }
  f.get();  // single whitespace after the header
  const bool little_endian = scale < 0.0;
  DepthMap out = DepthMap::create(w, h);
  std::vector<float> row(w);
  for (int y = h - 1; y >= 0; --y) {
    f.read(reinterpret_cast<char *>(row.data()), w * sizeof(float));
    if (!f) {
      throw Error(ErrorCode::parse_error, "truncated PFM: " + path);
    }
    for (int x = 0; x < w; ++x) {
      float v = row[x];
      if (!little_endian) {
        char *b = reinterpret_cast<char *>(&v);
        std::swap(b[0], b[3]);
        std::swap(b[1], b[2]);
      }
      if (std::isfinite(v) && v > 0.0f) out.set(x, y, v, true);
    }
  }
  return out;
}

DepthMap read_depth_any(const std::string &path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".pfm") {
    return read_depth_pfm(path);
  }
  return read_depth_png(path);
}

// --- intrinsics ----------------------------------------------------------------

CameraIntrinsics read_intrinsics(const std::string &path) {
  std::istringstream ss(read_text_file(path));
  std::vector<double> vals;
  double v;
  while (ss >> v) vals.push_back(v);
  if (vals.size() == 4) {
    return CameraIntrinsics::from(vals[0], vals[1], vals[2], vals[3]);
  }
  if (vals.size() == 5) {
    return CameraIntrinsics::from(vals[0], vals[1], vals[2], vals[3], vals[4]);
  }
  if (vals.size() == 9) {
    // Row-major 3x3 calibration matrix.
    if (std::abs(vals[3]) > 1e-12 || std::abs(vals[6]) > 1e-12 ||
        std::abs(vals[7]) > 1e-12 || std::abs(vals[8] - 1.0) > 1e-12) {
      throw Error(ErrorCode::parse_error,
                  "not an upper-triangular calibration matrix: " + path);
    }
    return CameraIntrinsics::from(vals[0], vals[4], vals[2], vals[5], vals[1]);
  }
  throw Error(ErrorCode::parse_error,
              "intrinsics file must hold 4, 5 or 9 numbers: " + path);
}

void write_intrinsics(const std::string &path, const CameraIntrinsics &k) {
  std::string line = format_double(k.fx) + " " + format_double(k.fy) + " " +
                     format_double(k.cx) + " " + format_double(k.cy) + " " +
                     format_double(k.skew) + "\n";
  write_text_file(path, line);
}

// --- matches CSV -----------------------------------------------------------------

std::vector<Correspondence> read_matches_csv(const std::string &path) {
  std::istringstream ss(read_text_file(path));
  std::string line;
  int line_no = 0;
  if (!std::getline(ss, line)) {
    throw Error(ErrorCode::parse_error, path + ": empty matches file");
  }
  ++line_no;
  {
    std::string header = line;
    header.erase(std::remove_if(header.begin(), header.end(),
                                [](char c) { return c == ' ' || c == '\r'; }),
                 header.end());
    if (header != "x1,y1,x2,y2") {
      throw Error(ErrorCode::parse_error,
                  path + " line 1: expected header x1,y1,x2,y2");
    }
  }
  std::vector<Correspondence> out;
  while (std::getline(ss, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x1, y1, x2, y2;
    if (!(ls >> x1 >> y1 >> x2 >> y2)) {
      throw Error(ErrorCode::parse_error,
                  path + " line " + std::to_string(line_no) + ": malformed row");
    }
    if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) ||
        !std::isfinite(y2)) {
      throw Error(ErrorCode::parse_error,
                  path + " line " + std::to_string(line_no) + ": non-finite value");
    }
    out.push_back({{x1, y1}, {x2, y2}});
  }
  return out;
}

void write_matches_csv(const std::string &path,
                       std::span<const Correspondence> matches) {
  std::string out = "x1,y1,x2,y2\n";
  for (const Correspondence &c : matches) {
    out += format_double(c.view1.x) + "," + format_double(c.view1.y) + "," +
           format_double(c.view2.x) + "," + format_double(c.view2.y) + "\n";
  }
  write_text_file(path, out);
}

// --- KITTI poses -------------------------------------------------------------------

std::vector<PoseSE3> read_kitti_poses(const std::string &path) {
  std::istringstream ss(read_text_file(path));
  std::string line;
  std::vector<PoseSE3> out;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (v.size() != 12) {
      throw Error(ErrorCode::parse_error,
                  path + " line " + std::to_string(line_no) +
                      ": expected 12 numbers, got " + std::to_string(v.size()));
    }
    Mat3 r;
    r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    const Vec3 t(v[3], v[7], v[11]);
    const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho >= 1e-9) {
      if (ortho > 1e-6) {
        throw Error(ErrorCode::parse_error,
                    path + " line " + std::to_string(line_no) +
                        ": rotation is far from orthonormal");
      }
      // Text round-off: project onto the nearest rotation.
      Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
      r = svd.matrixU() * svd.matrixV().transpose();
      if (r.determinant() < 0.0) {
        r = svd.matrixU() * Eigen::DiagonalMatrix<double, 3>(1.0, 1.0, -1.0) *
            svd.matrixV().transpose();
      }
    }
    out.push_back(PoseSE3::from(r, t));
  }
  return out;
}

void write_kitti_poses(const std::string &path, std::span<const PoseSE3> poses) {
  std::string out;
  for (const PoseSE3 &p : poses) {
    const double row[12] = {p.R(0, 0), p.R(0, 1), p.R(0, 2), p.t.x(),
                            p.R(1, 0), p.R(1, 1), p.R(1, 2), p.t.y(),
                            p.R(2, 0), p.R(2, 1), p.R(2, 2), p.t.z()};
    for (int i = 0; i < 12; ++i) {
      out += format_double(row[i]);
      out += i == 11 ? "\n" : " ";
    }
  }
  write_text_file(path, out);
}

// --- scene JSON -----------------------------------------------------------------------

namespace {

JsonValue vec3_json(const Vec3 &v) {
  JsonValue a = JsonValue::array();
  a.push(JsonValue::number(v.x()));
  a.push(JsonValue::number(v.y()));
  a.push(JsonValue::number(v.z()));
  return a;
}

Vec3 parse_vec3(const nlohmann::json &j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::parse_error, "expected a 3-vector");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Texture parse_texture(const nlohmann::json &j) {
  Texture t;
  const std::string kind = j.value("kind", "sinusoid");
  if (kind == "sinusoid") {
    t.kind = Texture::Kind::sinusoid;
  } else if (kind == "checker") {
    t.kind = Texture::Kind::checker;
  } else {
    throw Error(ErrorCode::parse_error, "unknown texture kind: " + kind);
  }
  t.base = j.value("base", t.base);
  t.amplitude = j.value("amplitude", t.amplitude);
  t.freq_u = j.value("freq_u", t.freq_u);
  t.freq_v = j.value("freq_v", t.freq_v);
  t.phase_u = j.value("phase_u", t.phase_u);
  t.phase_v = j.value("phase_v", t.phase_v);
  t.period = j.value("period", t.period);
  t.softness = j.value("softness", t.softness);
  if (j.contains("color")) t.color = parse_vec3(j["color"]);
  return t;
}

JsonValue texture_json(const Texture &t) {
  JsonValue j = JsonValue::object();
  j.set("kind", JsonValue::string(t.kind == Texture::Kind::sinusoid ? "sinusoid"
                                                                    : "checker"));
  j.set("base", JsonValue::number(t.base));
  j.set("amplitude", JsonValue::number(t.amplitude));
  j.set("freq_u", JsonValue::number(t.freq_u));
  j.set("freq_v", JsonValue::number(t.freq_v));
  j.set("phase_u", JsonValue::number(t.phase_u));
  j.set("phase_v", JsonValue::number(t.phase_v));
  j.set("period", JsonValue::number(t.period));
  j.set("softness", JsonValue::number(t.softness));
  j.set("color", vec3_json(t.color));
  return j;
}

}  // namespace

SceneSpec read_scene_json(const std::string &path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::parse_error, path + ": " + e.what());
  }
  try {
    SceneSpec scene;
    scene.width = j.at("width").get<int>();
    scene.height = j.at("height").get<int>();
    scene.channels = j.value("channels", 1);
    const auto &ki = j.at("intrinsics");
    scene.intrinsics = CameraIntrinsics::from(
        ki.at("fx").get<double>(), ki.at("fy").get<double>(),
        ki.at("cx").get<double>(), ki.at("cy").get<double>(),
        ki.value("skew", 0.0));
    for (const auto &pj : j.at("primitives")) {
      const std::string type = pj.at("type").get<std::string>();
      Texture tex = pj.contains("texture") ? parse_texture(pj["texture"]) : Texture{};
      Primitive prim;
      if (type == "plane") {
        prim = Primitive::make_plane(parse_vec3(pj.at("point")),
                                     parse_vec3(pj.at("normal")), tex,
                                     pj.value("extent_u", -1.0),
                                     pj.value("extent_v", -1.0));
      } else if (type == "box") {
        prim = Primitive::make_box(parse_vec3(pj.at("min")),
                                   parse_vec3(pj.at("max")), tex);
      } else {
        throw Error(ErrorCode::parse_error, "unknown primitive type: " + type);
      }
      prim.moving = pj.value("moving", false);
      scene.primitives.push_back(prim);
    }
    if (j.contains("object_motion")) {
      const auto &m = j["object_motion"];
      const Vec3 aa = m.contains("axis_angle") ? parse_vec3(m["axis_angle"])
                                               : Vec3::Zero();
      const Vec3 t = m.contains("translation") ? parse_vec3(m["translation"])
                                                : Vec3::Zero();
      scene.object_motion = PoseSE3{rotation_exp(aa), t};
      scene.has_object_motion = true;
    }
    return scene;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::parse_error, path + ": " + e.what());
  }
}

void write_scene_json(const std::string &path, const SceneSpec &scene) {
  JsonValue j = JsonValue::object();
  j.set("width", JsonValue::integer(scene.width));
  j.set("height", JsonValue::integer(scene.height));
  j.set("channels", JsonValue::integer(scene.channels));
  JsonValue ki = JsonValue::object();
  ki.set("fx", JsonValue::number(scene.intrinsics.fx));
  ki.set("fy", JsonValue::number(scene.intrinsics.fy));
  ki.set("cx", JsonValue::number(scene.intrinsics.cx));
  ki.set("cy", JsonValue::number(scene.intrinsics.cy));
  ki.set("skew", JsonValue::number(scene.intrinsics.skew));
  j.set("intrinsics", std::move(ki));
  JsonValue prims = JsonValue::array();
  for (const Primitive &p : scene.primitives) {
    JsonValue pj = JsonValue::object();
    if (p.kind == Primitive::Kind::plane) {
      pj.set("type", JsonValue::string("plane"));
      pj.set("point", vec3_json(p.point));
      pj.set("normal", vec3_json(p.normal));
      pj.set("extent_u", JsonValue::number(p.extent_u));
      pj.set("extent_v", JsonValue::number(p.extent_v));
    } else {
      pj.set("type", JsonValue::string("box"));
      pj.set("min", vec3_json(p.box_min));
      pj.set("max", vec3_json(p.box_max));
    }
    pj.set("moving", JsonValue::boolean(p.moving));
    pj.set("texture", texture_json(p.texture));
    prims.push(std::move(pj));
  }
  j.set("primitives", std::move(prims));
  if (scene.has_object_motion) {
    JsonValue m = JsonValue::object();
    m.set("axis_angle", vec3_json(rotation_log(scene.object_motion.R)));
    m.set("translation", vec3_json(scene.object_motion.t));
    j.set("object_motion", std::move(m));
  }
  write_text_file(path, j.dump());
}

// --- false color -----------------------------------------------------------------------

void write_false_color_png(const std::string &path,
                           const std::vector<double> &values, int width,
                           int height) {
  if (values.size() != static_cast<size_t>(width) * height) {
    throw Error(ErrorCode::shape_mismatch, "map size mismatch");
  }
  double vmax = 0.0;
  for (double v : values) vmax = std::max(vmax, v);
  if (vmax <= 0.0) vmax = 1.0;

  // Compact viridis-style ramp.
  const double anchors[5][3] = {{0.267, 0.005, 0.329},
                                {0.283, 0.141, 0.458},
                                {0.254, 0.265, 0.530},
                                {0.207, 0.372, 0.553},
                                {0.993, 0.906, 0.144}};
  ImageBuffer img = ImageBuffer::create(width, height, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t =
          std::min(1.0, std::max(0.0, values[static_cast<size_t>(y) * width + x] /
                                          vmax));
      const double pos = t * 4.0;
      const int i0 = std::min(3, static_cast<int>(pos));
      const double f = pos - i0;
      for (int c = 0; c < 3; ++c) {
        img.at(x, y, c) = std::min(
            1.0, std::max(0.0, anchors[i0][c] * (1.0 - f) + anchors[i0 + 1][c] * f));
      }
    }
  }
  write_image_png(path, img);
}

}  // namespace epigeo
