#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gmnn {

using Timestamp = std::int64_t;  // microseconds
using ClassId = std::int32_t;

inline constexpr Timestamp kMicrosPerMilli = 1000;

struct SensorGeometry {
  std::int32_t width = 346;
  std::int32_t height = 260;

  void validate() const;
  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

// One asynchronous DVS event. Polarity is carried for round-trip fidelity but
// never becomes a model feature.
struct Event {
  std::int32_t x = 0;
  std::int32_t y = 0;
  Timestamp t = 0;
  std::int8_t polarity = 1;
  std::optional<ClassId> label;

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventWindow {
  std::vector<Event> events;  // by timestamp, then ingestion order
  Timestamp t0 = 0;
  Timestamp duration = 0;
  bool truncated = false;

  bool empty() const noexcept { return events.empty(); }
  std::size_t size() const noexcept { return events.size(); }
};

struct ParseOptions {
  bool has_header = false;
};

// Parses `x,y,t_us,polarity[,label]` lines. '#' lines and blank lines are
// skipped. Throws ParseError (malformed line), BoundsError (coordinate outside
// the sensor) or OrderingError (timestamp decreases).
std::vector<Event> parse_event_stream(std::string_view text, const SensorGeometry& geometry,
                                      const ParseOptions& options = {});
std::vector<Event> read_event_file(const std::string& path, const SensorGeometry& geometry,
                                   const ParseOptions& options = {});

std::string serialize_events(const std::vector<Event>& events);
void write_event_file(const std::string& path, const std::vector<Event>& events);

struct WindowOptions {
  Timestamp duration = 100 * kMicrosPerMilli;
  std::size_t max_events = 10000;
  Timestamp stride = 0;  // 0 means tumbling (stride == duration)
};

// Slices a timestamp-ordered stream into windows starting at t_first,
// t_first + stride, ... Windows may be empty when the stream has gaps.
// A window holding more than max_events keeps only the most recent ones
// (later ingestion wins on equal timestamps) and is flagged truncated.
std::vector<EventWindow> window_events(const std::vector<Event>& stream, const WindowOptions& options);

bool all_labeled(const std::vector<Event>& events) noexcept;

}  // namespace gmnn
