#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "epigeo/image.hpp"
#include "epigeo/synthetic.hpp"

namespace epigeo {

// ---------------------------------------------------------------------------
// Deterministic JSON emission. Keys keep insertion order and doubles are
// formatted with 17 significant digits so identical inputs produce identical
// bytes.
class JsonValue {
 public:
  static JsonValue object();
  static JsonValue array();
  static JsonValue number(double v);
  static JsonValue integer(long long v);
  static JsonValue boolean(bool v);
  static JsonValue string(const std::string &v);
  static JsonValue null();

  JsonValue &set(const std::string &key, JsonValue v);  // object
  JsonValue &push(JsonValue v);                         // array

  std::string dump(int indent = 2) const;

 private:
  enum class Kind { object, array, number, integer, boolean, string, null };
  Kind kind_ = Kind::null;
  double num_ = 0.0;
  long long int_ = 0;
  bool bool_ = false;
  std::string str_;
  std::vector<std::pair<std::string, JsonValue>> members_;
  std::vector<JsonValue> items_;

  void write(std::string *out, int indent, int depth) const;
};

std::string format_double(double v);  // %.17g

// ---------------------------------------------------------------------------
// PNG images. 8-bit gray or RGB maps to [0, 1] by v/255.
ImageBuffer read_image_png(const std::string &path);
void write_image_png(const std::string &path, const ImageBuffer &img);

// 16-bit depth PNG with a JSON sidecar `<path>.json` holding {"scale": s}.
// depth = raw / scale; raw 0 marks invalid pixels.
void write_depth_png(const std::string &path, const DepthMap &depth,
                     double scale = 256.0);
DepthMap read_depth_png(const std::string &path);

// Grayscale PFM (float32, little-endian written). Values <= 0 or non-finite
// read back as invalid.
void write_depth_pfm(const std::string &path, const DepthMap &depth);
DepthMap read_depth_pfm(const std::string &path);

// Reads either by extension: .pfm or .png (with sidecar).
DepthMap read_depth_any(const std::string &path);

// ---------------------------------------------------------------------------
// Plain-text intrinsics: one line "fx fy cx cy [skew]" or nine row-major
// entries of K.
CameraIntrinsics read_intrinsics(const std::string &path);
void write_intrinsics(const std::string &path, const CameraIntrinsics &k);

// Matches CSV with header x1,y1,x2,y2.
std::vector<Correspondence> read_matches_csv(const std::string &path);
void write_matches_csv(const std::string &path,
                       std::span<const Correspondence> matches);

// KITTI odometry format: one 3x4 row-major pose (camera-to-world) per line.
std::vector<PoseSE3> read_kitti_poses(const std::string &path);
void write_kitti_poses(const std::string &path, std::span<const PoseSE3> poses);

// Scene description as a JSON document.
SceneSpec read_scene_json(const std::string &path);
void write_scene_json(const std::string &path, const SceneSpec &scene);

// False-color (viridis-like) visualization of a scalar map.
void write_false_color_png(const std::string &path,
                           const std::vector<double> &values, int width,
                           int height);

void write_text_file(const std::string &path, const std::string &content);
std::string read_text_file(const std::string &path);

}  // namespace epigeo
