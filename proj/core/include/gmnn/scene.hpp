#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gmnn/events.hpp"

namespace gmnn {

enum class Silhouette { kRectangle, kDisc };
enum class MotionKind { kLinear, kRotational, kPartialRotational };

struct SceneObject {
  Silhouette shape = Silhouette::kDisc;
  ClassId class_id = 1;
  double center_x = 0.0;  // pixels, at t = 0
  double center_y = 0.0;
  double width = 0.0;   // rectangle
  double height = 0.0;  // rectangle
  double radius = 0.0;  // disc
};

struct CameraMotion {
  MotionKind kind = MotionKind::kLinear;
  // Apparent image-plane speed in pixels per second. Rotational motion turns
  // the scene about the frame center at speed / (min(width, height) / 4) rad/s;
  // partial rotation splits the speed evenly between both components.
  double speed = 200.0;
  double direction_deg = 0.0;  // linear component heading
};

struct SceneConfig {
  SensorGeometry geometry;
  std::vector<SceneObject> objects;
  CameraMotion motion;
  Timestamp duration = 100 * kMicrosPerMilli;
  double event_rate = 20000.0;  // contour events per second, per object
  double noise_rate = 0.0;      // background events per second
  double edge_jitter_px = 0.5;

  void validate() const;
};

// Reads/writes the JSON scene document (schema in docs/formats.md).
SceneConfig parse_scene_config(std::string_view json_text);
std::string scene_config_to_json(const SceneConfig& config);

// Places `count` objects on a ring around the frame center, alternating
// discs and rectangles, classes 1..count.
SceneConfig default_scene(std::size_t object_count, MotionKind motion, const SensorGeometry& geometry);

MotionKind parse_motion_kind(std::string_view name);
std::string_view motion_kind_name(MotionKind kind);

// Deterministic in (config, seed). Contour events carry the object's class,
// noise events carry background class 0. Output is sorted by timestamp.
std::vector<Event> synth_scene(const SceneConfig& config, std::uint64_t seed);

}  // namespace gmnn
