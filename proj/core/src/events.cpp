#include "gmnn/events.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gmnn/error.hpp"

namespace gmnn {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_int(std::string_view field, T& out) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return false;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

void SensorGeometry::validate() const {
  if (width < 1 || height < 1) {
    throw ConfigError("sensor geometry must be at least 1x1, got " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
}

std::vector<Event> parse_event_stream(std::string_view text, const SensorGeometry& geometry,
                                      const ParseOptions& options) {
  geometry.validate();
  std::vector<Event> events;
  std::size_t line_no = 0;
  bool header_pending = options.has_header;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;

    if (line.empty() || line.front() == '#') continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }

    const auto fields = split_fields(line);
    if (fields.size() != 4 && fields.size() != 5) {
      throw ParseError(line_no, "expected 4 or 5 comma-separated fields, got " + std::to_string(fields.size()));
    }
    Event e;
    int polarity = 0;
    if (!parse_int(fields[0], e.x) || !parse_int(fields[1], e.y) || !parse_int(fields[2], e.t) ||
        !parse_int(fields[3], polarity)) {
      throw ParseError(line_no, "malformed event '" + std::string(line) + "'");
    }
    if (polarity == 1) {
      e.polarity = 1;
    } else if (polarity == -1 || polarity == 0) {
      e.polarity = -1;
    } else {
      throw ParseError(line_no, "polarity must be -1, 0 or 1");
    }
    if (fields.size() == 5) {
      ClassId label = 0;
      if (!parse_int(fields[4], label) || label < 0) {
        throw ParseError(line_no, "label must be a non-negative integer");
      }
      e.label = label;
    }
    if (e.t < 0) throw ParseError(line_no, "negative timestamp");
    if (e.x < 0 || e.x >= geometry.width || e.y < 0 || e.y >= geometry.height) {
      throw BoundsError("line " + std::to_string(line_no) + ": coordinate (" + std::to_string(e.x) + ", " +
                        std::to_string(e.y) + ") outside " + std::to_string(geometry.width) + "x" +
                        std::to_string(geometry.height) + " sensor");
    }
    if (!events.empty() && e.t < events.back().t) {
      throw OrderingError("line " + std::to_string(line_no) + ": timestamp " + std::to_string(e.t) +
                          " precedes " + std::to_string(events.back().t));
    }
    events.push_back(e);
  }
  return events;
}

std::vector<Event> read_event_file(const std::string& path, const SensorGeometry& geometry,
                                   const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open event file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_event_stream(buffer.str(), geometry, options);
}

std::string serialize_events(const std::vector<Event>& events) {
  std::string out;
  out.reserve(events.size() * 24);
  for (const auto& e : events) {
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += ',';
    out += std::to_string(e.t);
    out += ',';
    out += e.polarity > 0 ? "1" : "-1";
    if (e.label) {
      out += ',';
      out += std::to_string(*e.label);
    }
    out += '\n';
  }
  return out;
}

void write_event_file(const std::string& path, const std::vector<Event>& events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write event file '" + path + "'");
  out << "# x,y,t_us,polarity,label\n";
  out << serialize_events(events);
}

std::vector<EventWindow> window_events(const std::vector<Event>& stream, const WindowOptions& options) {
  if (options.duration <= 0) throw ConfigError("window duration must be positive");
  if (options.max_events < 1) throw ConfigError("N_max must be at least 1");
  if (options.stride < 0) throw ConfigError("window stride must be positive");
  const Timestamp stride = options.stride == 0 ? options.duration : options.stride;

  std::vector<EventWindow> windows;
  if (stream.empty()) return windows;

  const auto by_time = [](const Event& e, Timestamp t) { return e.t < t; };
  const Timestamp t_last = stream.back().t;
  for (Timestamp t0 = stream.front().t; t0 <= t_last; t0 += stride) {
    const auto first = std::lower_bound(stream.begin(), stream.end(), t0, by_time);
    const auto last = std::lower_bound(first, stream.end(), t0 + options.duration, by_time);
    EventWindow window;
    window.t0 = t0;
    window.duration = options.duration;
    const auto count = static_cast<std::size_t>(last - first);
    // The stream is ordered by (t, ingestion), so the tail holds the most
    // recent events.
    auto keep_from = first;
    if (count > options.max_events) {
      keep_from = last - static_cast<std::ptrdiff_t>(options.max_events);
      window.truncated = true;
    }
    window.events.assign(keep_from, last);
    windows.push_back(std::move(window));
  }
  return windows;
}

bool all_labeled(const std::vector<Event>& events) noexcept {
  return std::all_of(events.begin(), events.end(), [](const Event& e) { return e.label.has_value(); });
}

}  // namespace gmnn
