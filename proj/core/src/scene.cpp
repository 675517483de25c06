#include "gmnn/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "gmnn/error.hpp"

namespace gmnn {
namespace {

using nlohmann::json;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Image-plane transform applied to the whole scene at time t (seconds).
class SceneMotion {
 public:
  SceneMotion(const CameraMotion& motion, const SensorGeometry& geometry)
      : center_{geometry.width / 2.0, geometry.height / 2.0} {
    const double heading = motion.direction_deg * std::numbers::pi / 180.0;
    const double reference_radius = std::min(geometry.width, geometry.height) / 4.0;
    double linear_share = 0.0;
    double angular_share = 0.0;
    switch (motion.kind) {
      case MotionKind::kLinear:
        linear_share = 1.0;
        break;
      case MotionKind::kRotational:
        angular_share = 1.0;
        break;
      case MotionKind::kPartialRotational:
        linear_share = 0.5;
        angular_share = 0.5;
        break;
    }
    velocity_ = {linear_share * motion.speed * std::cos(heading), linear_share * motion.speed * std::sin(heading)};
    angular_velocity_ = angular_share * motion.speed / reference_radius;
  }

  Vec2 apply(Vec2 p, double t) const {
    const Vec2 r = rotate({p.x - center_.x, p.y - center_.y}, angular_velocity_ * t);
    return {center_.x + r.x + velocity_.x * t, center_.y + r.y + velocity_.y * t};
  }

  Vec2 rotate_direction(Vec2 d, double t) const { return rotate(d, angular_velocity_ * t); }

 private:
  Vec2 center_;
  Vec2 velocity_;
  double angular_velocity_ = 0.0;
};

struct ContourSample {
  Vec2 point;   // object frame, relative to center
  Vec2 normal;  // outward
};

ContourSample sample_contour(const SceneObject& object, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (object.shape == Silhouette::kDisc) {
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const Vec2 n{std::cos(angle), std::sin(angle)};
    return {{object.radius * n.x, object.radius * n.y}, n};
  }
  const double w = object.width;
  const double h = object.height;
  double s = unit(rng) * 2.0 * (w + h);
  if (s < w) return {{s - w / 2, -h / 2}, {0, -1}};
  s -= w;
  if (s < h) return {{w / 2, s - h / 2}, {1, 0}};
  s -= h;
  if (s < w) return {{w / 2 - s, h / 2}, {0, 1}};
  s -= w;
  return {{-w / 2, h / 2 - s}, {-1, 0}};
}

Silhouette parse_silhouette(const std::string& name) {
  if (name == "disc" || name == "circle") return Silhouette::kDisc;
  if (name == "rectangle" || name == "rect") return Silhouette::kRectangle;
  throw ConfigError("unknown silhouette '" + name + "'");
}

}  // namespace

MotionKind parse_motion_kind(std::string_view name) {
  if (name == "linear") return MotionKind::kLinear;
  if (name == "rotational") return MotionKind::kRotational;
  if (name == "partial-rotational" || name == "partial_rotational") return MotionKind::kPartialRotational;
  throw ConfigError("unknown motion '" + std::string(name) + "' (linear | rotational | partial-rotational)");
}

std::string_view motion_kind_name(MotionKind kind) {
  switch (kind) {
    case MotionKind::kLinear:
      return "linear";
    case MotionKind::kRotational:
      return "rotational";
    case MotionKind::kPartialRotational:
      return "partial-rotational";
  }
  return "linear";
}

void SceneConfig::validate() const {
  geometry.validate();
  if (duration <= 0) throw ConfigError("scene duration must be positive");
  if (!(event_rate > 0.0)) throw ConfigError("event rate must be positive");
  if (noise_rate < 0.0) throw ConfigError("noise rate must be non-negative");
  if (edge_jitter_px < 0.0) throw ConfigError("edge jitter must be non-negative");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    const bool zero_area = o.shape == Silhouette::kDisc ? !(o.radius > 0.0) : !(o.width > 0.0 && o.height > 0.0);
    if (zero_area) throw ConfigError("object " + std::to_string(i) + " has zero area");
    if (o.class_id < 0) throw ConfigError("object " + std::to_string(i) + " has a negative class id");
  }
}

SceneConfig parse_scene_config(std::string_view json_text) {
  SceneConfig config;
  try {
    const json doc = json::parse(json_text);
    config.geometry.width = doc.value("width", config.geometry.width);
    config.geometry.height = doc.value("height", config.geometry.height);
    if (doc.contains("duration_us")) {
      config.duration = doc.at("duration_us").get<Timestamp>();
    } else if (doc.contains("duration_ms")) {
      config.duration = static_cast<Timestamp>(std::llround(doc.at("duration_ms").get<double>() * kMicrosPerMilli));
    }
    config.event_rate = doc.value("event_rate", config.event_rate);
    config.noise_rate = doc.value("noise_rate", config.noise_rate);
    config.edge_jitter_px = doc.value("edge_jitter_px", config.edge_jitter_px);
    if (doc.contains("motion")) {
      const auto& m = doc.at("motion");
      config.motion.kind = parse_motion_kind(m.value("kind", std::string("linear")));
      config.motion.speed = m.value("speed", config.motion.speed);
      config.motion.direction_deg = m.value("direction_deg", config.motion.direction_deg);
    }
    for (const auto& o : doc.value("objects", json::array())) {
      SceneObject object;
      object.shape = parse_silhouette(o.at("shape").get<std::string>());
      object.class_id = o.at("class").get<ClassId>();
      const auto center = o.at("center");
      object.center_x = center.at(0).get<double>();
      object.center_y = center.at(1).get<double>();
      if (object.shape == Silhouette::kDisc) {
        object.radius = o.at("radius").get<double>();
      } else {
        const auto size = o.at("size");
        object.width = size.at(0).get<double>();
        object.height = size.at(1).get<double>();
      }
      config.objects.push_back(object);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
  config.validate();
  return config;
}

std::string scene_config_to_json(const SceneConfig& config) {
  json doc;
  doc["width"] = config.geometry.width;
  doc["height"] = config.geometry.height;
  doc["duration_us"] = config.duration;
  doc["event_rate"] = config.event_rate;
  doc["noise_rate"] = config.noise_rate;
  doc["edge_jitter_px"] = config.edge_jitter_px;
  doc["motion"] = {{"kind", motion_kind_name(config.motion.kind)},
                   {"speed", config.motion.speed},
                   {"direction_deg", config.motion.direction_deg}};
  json objects = json::array();
  for (const auto& o : config.objects) {
    json j{{"class", o.class_id}, {"center", {o.center_x, o.center_y}}};
    if (o.shape == Silhouette::kDisc) {
      j["shape"] = "disc";
      j["radius"] = o.radius;
    } else {
      j["shape"] = "rectangle";
      j["size"] = {o.width, o.height};
    }
    objects.push_back(std::move(j));
  }
  doc["objects"] = std::move(objects);
  return doc.dump(2);
}

SceneConfig default_scene(std::size_t object_count, MotionKind motion, const SensorGeometry& geometry) {
  SceneConfig config;
  config.geometry = geometry;
  config.motion.kind = motion;
  const double cx = geometry.width / 2.0;
  const double cy = geometry.height / 2.0;
  const double extent = std::min(geometry.width, geometry.height);
  const double ring = object_count > 1 ? extent / 4.0 : 0.0;
  for (std::size_t i = 0; i < object_count; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(object_count);
    SceneObject o;
    o.class_id = static_cast<ClassId>(i + 1);
    o.center_x = cx + ring * std::cos(angle);
    o.center_y = cy + ring * std::sin(angle);
    if (i % 2 == 0) {
      o.shape = Silhouette::kDisc;
      o.radius = extent / 10.0;
    } else {
      o.shape = Silhouette::kRectangle;
      o.width = extent / 6.0;
      o.height = extent / 8.0;
    }
    config.objects.push_back(o);
  }
  return config;
}

std::vector<Event> synth_scene(const SceneConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const SceneMotion motion(config.motion, config.geometry);
  const double seconds = static_cast<double>(config.duration) * 1e-6;
  const auto random_time = [&] {
    return std::min<Timestamp>(config.duration - 1, static_cast<Timestamp>(unit(rng) * static_cast<double>(config.duration)));
  };

  std::vector<Event> events;
  for (const auto& object : config.objects) {
    std::poisson_distribution<long long> count_dist(config.event_rate * seconds);
    const long long count = count_dist(rng);
    for (long long n = 0; n < count; ++n) {
      const Timestamp t = random_time();
      const double ts = static_cast<double>(t) * 1e-6;
      const ContourSample c = sample_contour(object, rng);
      const Vec2 local{object.center_x + c.point.x + config.edge_jitter_px * (2.0 * unit(rng) - 1.0),
                       object.center_y + c.point.y + config.edge_jitter_px * (2.0 * unit(rng) - 1.0)};
      const Vec2 now = motion.apply(local, ts);
      const Vec2 later = motion.apply(local, ts + 1e-4);
      const Vec2 normal = motion.rotate_direction(c.normal, ts);
      const double leading = (later.x - now.x) * normal.x + (later.y - now.y) * normal.y;

      Event e;
      e.x = static_cast<std::int32_t>(std::lround(now.x));
      e.y = static_cast<std::int32_t>(std::lround(now.y));
      e.t = t;
      e.polarity = leading >= 0.0 ? 1 : -1;
      e.label = object.class_id;
      if (e.x < 0 || e.x >= config.geometry.width || e.y < 0 || e.y >= config.geometry.height) continue;
      events.push_back(e);
    }
  }

  if (config.noise_rate > 0.0) {
    std::poisson_distribution<long long> noise_dist(config.noise_rate * seconds);
    const long long count = noise_dist(rng);
    for (long long n = 0; n < count; ++n) {
      Event e;
      e.t = random_time();
      e.x = std::min(config.geometry.width - 1, static_cast<std::int32_t>(unit(rng) * config.geometry.width));
      e.y = std::min(config.geometry.height - 1, static_cast<std::int32_t>(unit(rng) * config.geometry.height));
      e.polarity = unit(rng) < 0.5 ? -1 : 1;
      e.label = 0;
      events.push_back(e);
    }
  }

  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return events;
}

}  // namespace gmnn
