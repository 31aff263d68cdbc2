#include "cvanet/trace.hpp"

#include <expat.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "cvanet/error.hpp"
#include "cvanet/format.hpp"

namespace cvanet {

namespace {

constexpr double kSpeedWarning = 100.0;
constexpr double kCoordinateWarning = 1e7;

std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

void sort_vehicles(Timestep& ts) {
  std::stable_sort(ts.vehicles.begin(), ts.vehicles.end(),
                   [](const VehicleState& a, const VehicleState& b) { return a.id < b.id; });
}

Scenario finish(std::vector<Timestep> timesteps, std::string name) {
  for (auto& ts : timesteps) sort_vehicles(ts);
  Scenario s;
  s.name = std::move(name);
  s.nominal_dt = nominal_dt(timesteps);
  s.timesteps = std::move(timesteps);
  return s;
}

// Validates the numeric fields of one vehicle. `where` is appended to messages.
void check_vehicle(const VehicleState& v, const std::string& where) {
  if (v.id.empty()) throw ParseError("empty vehicle id " + where);
  if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.speed) ||
      !std::isfinite(v.angle)) {
    throw ParseError("non-finite value for vehicle " + v.id + " " + where);
  }
  if (v.speed < 0.0) throw ParseError("negative speed for vehicle " + v.id + " " + where);
}

// ---------------------------------------------------------------------------
// FCD XML

struct FcdParser {
  XML_Parser parser = nullptr;
  std::vector<Timestep> timesteps;
  bool in_timestep = false;
  std::string time_text;
  std::optional<std::string> error;

  void fail(std::string message) {
    if (error) return;
    error = "line " + std::to_string(XML_GetCurrentLineNumber(parser)) + ": " + std::move(message);
    XML_StopParser(parser, XML_FALSE);
  }

  static const char* find_attr(const XML_Char** attrs, const char* name) {
    for (int i = 0; attrs[i] != nullptr; i += 2) {
      if (std::strcmp(attrs[i], name) == 0) return attrs[i + 1];
    }
    return nullptr;
  }

  void on_timestep(const XML_Char** attrs) {
    const char* time_attr = find_attr(attrs, "time");
    if (time_attr == nullptr) return fail("missing attribute 'time' on timestep");
    const auto time = parse_double(time_attr);
    if (!time || !std::isfinite(*time)) return fail(std::string("invalid time '") + time_attr + "'");
    if (*time < 0.0) return fail(std::string("negative time '") + time_attr + "'");
    if (!timesteps.empty() && *time <= timesteps.back().time) {
      return fail(std::string("non-monotonic time ") + time_attr);
    }
    timesteps.push_back(Timestep{*time, {}});
    time_text = time_attr;
    in_timestep = true;
  }

  void on_vehicle(const XML_Char** attrs) {
    VehicleState v;
    const char* id = find_attr(attrs, "id");
    if (id == nullptr) return fail("missing attribute 'id' on vehicle at t=" + time_text);
    v.id = id;
    struct Field {
      const char* name;
      double* target;
    };
    for (const Field f : {Field{"x", &v.x}, Field{"y", &v.y}, Field{"speed", &v.speed},
                          Field{"angle", &v.angle}}) {
      const char* text = find_attr(attrs, f.name);
      if (text == nullptr) {
        return fail(std::string("missing attribute '") + f.name + "' on vehicle " + v.id +
                    " at t=" + time_text);
      }
      const auto value = parse_double(text);
      if (!value) {
        return fail(std::string("invalid number '") + text + "' for attribute '" + f.name +
                    "' on vehicle " + v.id + " at t=" + time_text);
      }
      *f.target = *value;
    }
    try {
      check_vehicle(v, "at t=" + time_text);
    } catch (const ParseError& e) {
      return fail(e.what());
    }
    v.angle = normalize_angle(v.angle);
    timesteps.back().vehicles.push_back(std::move(v));
  }

  static void XMLCALL start(void* data, const XML_Char* name, const XML_Char** attrs) {
    auto* self = static_cast<FcdParser*>(data);
    if (std::strcmp(name, "timestep") == 0) {
      self->on_timestep(attrs);
    } else if (self->in_timestep && std::strcmp(name, "vehicle") == 0) {
      self->on_vehicle(attrs);
    }
  }

  static void XMLCALL end(void* data, const XML_Char* name) {
    auto* self = static_cast<FcdParser*>(data);
    if (std::strcmp(name, "timestep") == 0) self->in_timestep = false;
  }
};

struct ExpatDeleter {
  void operator()(XML_ParserStruct* p) const { XML_ParserFree(p); }
};

// ---------------------------------------------------------------------------
// CSV

constexpr std::string_view kCsvHeader = "t,id,x,y,speed,angle";

}  // namespace

double normalize_angle(double degrees) {
  double a = std::fmod(degrees, 360.0);
  if (a < 0.0) a += 360.0;
  if (a >= 360.0 || a == 0.0) a = 0.0;
  return a;
}

double nominal_dt(const std::vector<Timestep>& timesteps) {
  if (timesteps.size() < 2) return 1.0;
  std::vector<double> deltas;
  deltas.reserve(timesteps.size() - 1);
  for (std::size_t i = 1; i < timesteps.size(); ++i) {
    deltas.push_back(timesteps[i].time - timesteps[i - 1].time);
  }
  std::sort(deltas.begin(), deltas.end());
  const std::size_t mid = deltas.size() / 2;
  if (deltas.size() % 2 == 1) return deltas[mid];
  return 0.5 * (deltas[mid - 1] + deltas[mid]);
}

Scenario parse_fcd_xml(std::string_view bytes, std::string name) {
  std::unique_ptr<XML_ParserStruct, ExpatDeleter> parser(XML_ParserCreate("UTF-8"));
  if (!parser) throw std::bad_alloc();
  FcdParser state;
  state.parser = parser.get();
  XML_SetUserData(parser.get(), &state);
  XML_SetElementHandler(parser.get(), &FcdParser::start, &FcdParser::end);

  // Expat takes an int length; feed large documents in chunks.
  constexpr std::size_t kChunk = std::size_t{1} << 30;
  std::size_t offset = 0;
  do {
    const std::size_t len = std::min(kChunk, bytes.size() - offset);
    const bool last = offset + len == bytes.size();
    const auto status =
        XML_Parse(parser.get(), bytes.data() + offset, static_cast<int>(len), last ? 1 : 0);
    if (state.error) throw ParseError(*state.error);
    if (status != XML_STATUS_OK) {
      throw ParseError("line " + std::to_string(XML_GetCurrentLineNumber(parser.get())) +
                       ": malformed XML: " + XML_ErrorString(XML_GetErrorCode(parser.get())));
    }
    offset += len;
  } while (offset < bytes.size());

  return finish(std::move(state.timesteps), std::move(name));
}

Scenario parse_csv(std::string_view bytes, std::string name) {
  std::vector<Timestep> timesteps;
  std::size_t row = 0;
  bool seen_header = false;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) eol = bytes.size();
    std::string_view line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    ++row;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!seen_header) {
      if (row == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
      if (line != kCsvHeader) throw ParseError("bad header");
      seen_header = true;
      continue;
    }
    if (line.empty()) continue;

    std::string_view fields[6];
    std::size_t n = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (n < 6) fields[n] = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
      ++n;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    const std::string where = "at row " + std::to_string(row);
    if (n != 6) {
      throw ParseError("wrong field count " + where + ": expected 6, got " + std::to_string(n));
    }

    const auto t = parse_double(fields[0]);
    if (!t) throw ParseError("invalid time " + where);
    if (!std::isfinite(*t)) throw ParseError("non-finite time " + where);
    if (*t < 0.0) throw ParseError("negative time " + where);

    VehicleState v;
    v.id = std::string(fields[1]);
    double* targets[] = {&v.x, &v.y, &v.speed, &v.angle};
    static constexpr const char* kNames[] = {"x", "y", "speed", "angle"};
    for (std::size_t i = 0; i < 4; ++i) {
      const auto value = parse_double(fields[i + 2]);
      if (!value) throw ParseError(std::string("invalid number for ") + kNames[i] + " " + where);
      *targets[i] = *value;
    }
    check_vehicle(v, where);
    v.angle = normalize_angle(v.angle);

    if (timesteps.empty() || *t > timesteps.back().time) {
      timesteps.push_back(Timestep{*t, {}});
    } else if (*t < timesteps.back().time) {
      throw ParseError("non-monotonic time " + where);
    }
    timesteps.back().vehicles.push_back(std::move(v));
  }
  if (!seen_header) throw ParseError("bad header");
  return finish(std::move(timesteps), std::move(name));
}

Scenario parse_scenario(std::string_view bytes, TraceFormat format, std::string name) {
  return format == TraceFormat::kFcdXml ? parse_fcd_xml(bytes, std::move(name))
                                        : parse_csv(bytes, std::move(name));
}

TraceFormat detect_format(std::string_view bytes) {
  if (bytes.starts_with("\xEF\xBB\xBF")) bytes.remove_prefix(3);
  const auto first = bytes.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && bytes[first] == '<') return TraceFormat::kFcdXml;
  return TraceFormat::kCsv;
}

std::string to_csv(const Scenario& s) {
  std::string out(kCsvHeader);
  out.push_back('\n');
  for (const auto& ts : s.timesteps) {
    for (const auto& v : ts.vehicles) {
      append_number(out, ts.time);
      out.push_back(',');
      out += v.id;
      for (const double value : {v.x, v.y, v.speed, v.angle}) {
        out.push_back(',');
        append_number(out, value);
      }
      out.push_back('\n');
    }
  }
  return out;
}

ValidationReport validate_scenario(const Scenario& s) {
  ValidationReport report;
  report.n_timesteps = s.timesteps.size();
  if (s.timesteps.empty()) {
    report.errors.emplace_back("empty scenario");
    return report;
  }

  // Last timestep index at which each id was seen.
  std::map<std::string, std::size_t> last_seen;
  std::set<std::string> warned_reappear, warned_speed, warned_coord;

  for (std::size_t k = 0; k < s.timesteps.size(); ++k) {
    const Timestep& ts = s.timesteps[k];
    const std::string at = " at t=" + format_number(ts.time);
    if (!std::isfinite(ts.time) || ts.time < 0.0) {
      report.errors.push_back("invalid time" + at);
    }
    if (k > 0 && !(ts.time > s.timesteps[k - 1].time)) {
      report.errors.push_back("non-monotonic time" + at);
    }
    for (std::size_t i = 0; i < ts.vehicles.size(); ++i) {
      const VehicleState& v = ts.vehicles[i];
      if (i > 0) {
        const std::string& prev = ts.vehicles[i - 1].id;
        if (prev == v.id) {
          report.errors.push_back("duplicate id " + v.id + at);
          continue;
        }
        if (prev > v.id) report.errors.push_back("vehicles not sorted by id" + at);
      }
      if (v.id.empty()) report.errors.push_back("empty vehicle id" + at);
      if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.speed) ||
          !std::isfinite(v.angle) || v.speed < 0.0) {
        report.errors.push_back("invalid state for id " + v.id + at);
        continue;
      }
      if (v.speed > kSpeedWarning && warned_speed.insert(v.id).second) {
        report.warnings.push_back("id " + v.id + " speed " + format_number(v.speed) +
                                  " m/s exceeds 100 m/s" + at);
      }
      if ((std::abs(v.x) > kCoordinateWarning || std::abs(v.y) > kCoordinateWarning) &&
          warned_coord.insert(v.id).second) {
        report.warnings.push_back("id " + v.id + " coordinate magnitude exceeds 1e7 m" + at);
      }
      auto [it, inserted] = last_seen.try_emplace(v.id, k);
      if (!inserted) {
        if (it->second + 1 < k && warned_reappear.insert(v.id).second) {
          report.warnings.push_back("id " + v.id + " reappears" + at);
        }
        it->second = k;
      }
    }
  }
  report.n_vehicles = last_seen.size();
  return report;
}

}  // namespace cvanet
