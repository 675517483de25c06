#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gmnn/error.hpp"
#include "gmnn/events.hpp"
#include "gmnn/scene.hpp"

namespace gmnn {
namespace {

const SensorGeometry kGeo;

TEST(ParseEvents, ReadsLabeledAndUnlabeledLines) {
  const auto ev = parse_event_stream("# comment\n10,20,5,1,3\n\n11,21,6,-1\n", kGeo);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].x, 10);
  EXPECT_EQ(ev[0].y, 20);
  EXPECT_EQ(ev[0].t, 5);
  EXPECT_EQ(ev[0].polarity, 1);
  EXPECT_EQ(ev[0].label, 3);
  EXPECT_EQ(ev[1].polarity, -1);
  EXPECT_FALSE(ev[1].label.has_value());
  EXPECT_FALSE(all_labeled(ev));
}

TEST(ParseEvents, ZeroPolarityMeansOff) {
  const auto ev = parse_event_stream("1,1,1,0\n", kGeo);
  EXPECT_EQ(ev[0].polarity, -1);
}

TEST(ParseEvents, SkipsHeaderWhenAsked) {
  const auto ev = parse_event_stream("x,y,t,p\n1,2,3,1\n", kGeo, ParseOptions{true});
  EXPECT_EQ(ev.size(), 1u);
  EXPECT_THROW(parse_event_stream("x,y,t,p\n1,2,3,1\n", kGeo), ParseError);
}

TEST(ParseEvents, ReportsLineOfMalformedInput) {
  try {
    parse_event_stream("1,2,3,1\n1,2,x,1\n", kGeo);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_event_stream("1,2,3\n", kGeo), ParseError);
  EXPECT_THROW(parse_event_stream("1,2,3,1,2,9\n", kGeo), ParseError);
  EXPECT_THROW(parse_event_stream("1,2,3,5\n", kGeo), ParseError);
}

TEST(ParseEvents, RejectsOutOfBoundsAndDecreasingTime) {
  EXPECT_THROW(parse_event_stream("346,0,1,1\n", kGeo), BoundsError);
  EXPECT_THROW(parse_event_stream("0,260,1,1\n", kGeo), BoundsError);
  EXPECT_THROW(parse_event_stream("-1,0,1,1\n", kGeo), BoundsError);
  EXPECT_THROW(parse_event_stream("0,0,5,1\n0,0,4,1\n", kGeo), OrderingError);
  EXPECT_NO_THROW(parse_event_stream("0,0,5,1\n0,0,5,1\n", kGeo));
}

TEST(ParseEvents, ErrorsMapToDataExitCode) {
  try {
    parse_event_stream("0,0,5,1\n0,0,4,1\n", kGeo);
  } catch (const Error& e) {
    EXPECT_EQ(exit_code_for(e), kExitData);
  }
}

TEST(EventFile, RoundTrips) {
  const auto path = std::filesystem::temp_directory_path() / "gmnn_events_roundtrip.csv";
  std::vector<Event> ev{{1, 2, 10, 1, 0}, {3, 4, 11, -1, 2}, {5, 6, 11, 1, std::nullopt}};
  write_event_file(path.string(), ev);
  const auto back = read_event_file(path.string(), kGeo);
  ASSERT_EQ(back.size(), ev.size());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    EXPECT_EQ(back[i].x, ev[i].x);
    EXPECT_EQ(back[i].t, ev[i].t);
    EXPECT_EQ(back[i].polarity, ev[i].polarity);
    EXPECT_EQ(back[i].label, ev[i].label);
  }
  std::filesystem::remove(path);
}

std::vector<Event> ramp(std::size_t n, Timestamp dt) {
  std::vector<Event> ev;
  for (std::size_t i = 0; i < n; ++i) ev.push_back({static_cast<int>(i % 300), 0, static_cast<Timestamp>(i) * dt, 1, 1});
  return ev;
}

TEST(Windowing, TumblingWindowsPartitionTheStream) {
  const auto ev = ramp(1000, 1000);  // 1 ms apart, 1 s total
  const auto w = window_events(ev, WindowOptions{});
  ASSERT_EQ(w.size(), 10u);
  std::size_t total = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(w[i].t0, static_cast<Timestamp>(i) * 100000);
    EXPECT_EQ(w[i].size(), 100u);
    EXPECT_FALSE(w[i].truncated);
    total += w[i].size();
  }
  EXPECT_EQ(total, ev.size());
}

TEST(Windowing, KeepsMostRecentEventsWhenOverCapacity) {
  const auto ev = ramp(50, 1);
  WindowOptions o;
  o.max_events = 10;
  const auto w = window_events(ev, o);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_TRUE(w[0].truncated);
  ASSERT_EQ(w[0].size(), 10u);
  EXPECT_EQ(w[0].events.front().t, 40);
  EXPECT_EQ(w[0].events.back().t, 49);
}

TEST(Windowing, LaterIngestionWinsOnEqualTimestamps) {
  std::vector<Event> ev{{1, 0, 5, 1, 1}, {2, 0, 5, 1, 1}, {3, 0, 5, 1, 1}};
  WindowOptions o;
  o.max_events = 2;
  const auto w = window_events(ev, o);
  ASSERT_EQ(w[0].size(), 2u);
  EXPECT_EQ(w[0].events[0].x, 2);
  EXPECT_EQ(w[0].events[1].x, 3);
}

TEST(Windowing, StridedWindowsOverlap) {
  const auto ev = ramp(300, 1000);
  WindowOptions o;
  o.stride = 50 * kMicrosPerMilli;
  const auto w = window_events(ev, o);
  ASSERT_GE(w.size(), 5u);
  EXPECT_EQ(w[1].t0, 50000);
  EXPECT_EQ(w[0].size(), 100u);
  EXPECT_EQ(w[1].events.front().t, 50000);
}

TEST(Windowing, GapsProduceEmptyWindows) {
  std::vector<Event> ev{{0, 0, 0, 1, 1}, {0, 0, 350000, 1, 1}};
  const auto w = window_events(ev, WindowOptions{});
  ASSERT_EQ(w.size(), 4u);
  EXPECT_TRUE(w[1].empty());
  EXPECT_TRUE(w[2].empty());
  EXPECT_EQ(w[3].size(), 1u);
}

TEST(Windowing, EmptyStreamHasNoWindows) { EXPECT_TRUE(window_events({}, WindowOptions{}).empty()); }

TEST(Scene, IsDeterministicPerSeed) {
  const auto cfg = default_scene(2, MotionKind::kRotational, kGeo);
  const auto a = synth_scene(cfg, 1), b = synth_scene(cfg, 1), c = synth_scene(cfg, 2);
  EXPECT_EQ(serialize_events(a), serialize_events(b));
  EXPECT_NE(serialize_events(a), serialize_events(c));
}

TEST(Scene, EventsAreSortedInBoundsAndLabeled) {
  auto cfg = default_scene(3, MotionKind::kPartialRotational, kGeo);
  cfg.noise_rate = 5000;
  const auto ev = synth_scene(cfg, 4);
  ASSERT_FALSE(ev.empty());
  EXPECT_TRUE(all_labeled(ev));
  for (std::size_t i = 0; i < ev.size(); ++i) {
    EXPECT_GE(ev[i].x, 0);
    EXPECT_LT(ev[i].x, kGeo.width);
    EXPECT_GE(ev[i].y, 0);
    EXPECT_LT(ev[i].y, kGeo.height);
    EXPECT_TRUE(ev[i].polarity == 1 || ev[i].polarity == -1);
    if (i > 0) EXPECT_LE(ev[i - 1].t, ev[i].t);
    EXPECT_GE(*ev[i].label, 0);
    EXPECT_LE(*ev[i].label, 3);
  }
}

TEST(Scene, NoNoiseMeansNoBackgroundEvents) {
  auto cfg = default_scene(2, MotionKind::kLinear, kGeo);
  cfg.noise_rate = 0;
  for (const auto& e : synth_scene(cfg, 9)) EXPECT_NE(*e.label, 0);
}

TEST(Scene, ContourEventsHugTheSilhouette) {
  SceneConfig cfg;
  SceneObject disc;
  disc.center_x = 173;
  disc.center_y = 130;
  disc.radius = 40;
  cfg.objects = {disc};
  cfg.motion.speed = 0;
  cfg.edge_jitter_px = 0.5;
  for (const auto& e : synth_scene(cfg, 3)) {
    const double r = std::hypot(e.x + 0.5 - 173, e.y + 0.5 - 130);
    EXPECT_NEAR(r, 40.0, 3.0);
  }
}

TEST(Scene, JsonRoundTrip) {
  auto cfg = default_scene(2, MotionKind::kLinear, kGeo);
  cfg.noise_rate = 12;
  const auto back = parse_scene_config(scene_config_to_json(cfg));
  EXPECT_EQ(scene_config_to_json(back), scene_config_to_json(cfg));
  EXPECT_EQ(serialize_events(synth_scene(back, 5)), serialize_events(synth_scene(cfg, 5)));
}

TEST(Scene, InvalidConfigsAreConfigErrors) {
  EXPECT_THROW(parse_scene_config("{"), ConfigError);
  EXPECT_THROW(parse_scene_config(R"({"objects":[{"shape":"disc","class":1,"center":[1,1],"radius":0}]})"),
               ConfigError);
  EXPECT_THROW(parse_scene_config(R"({"event_rate":-1,"objects":[]})"), ConfigError);
  EXPECT_THROW(parse_motion_kind("wobble"), ConfigError);
}

}  // namespace
}  // namespace gmnn
