#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cvanet {

/// Kinematic state of one vehicle at one instant.
/// `angle` follows the SUMO compass convention: 0 = north, clockwise positive,
/// always normalized into [0, 360).
struct VehicleState {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  double speed = 0.0;
  double angle = 0.0;

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct Timestep {
  double time = 0.0;
  std::vector<VehicleState> vehicles;  // ascending id byte order

  friend bool operator==(const Timestep&, const Timestep&) = default;
};

struct Scenario {
  std::string name;
  std::vector<Timestep> timesteps;  // strictly increasing time
  double nominal_dt = 1.0;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct ValidationReport {
  std::size_t n_timesteps = 0;
  std::size_t n_vehicles = 0;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;

  bool runnable() const { return errors.empty(); }
};

enum class TraceFormat { kFcdXml, kCsv };

/// Parses a SUMO floating-car-data export. One Timestep per `<timestep>`
/// element; `<vehicle>` children contribute id, x, y, speed and angle. Any other
/// attribute or element is ignored.
Scenario parse_fcd_xml(std::string_view bytes, std::string name = {});

/// Parses `t,id,x,y,speed,angle` CSV. Rows with equal t form one timestep.
Scenario parse_csv(std::string_view bytes, std::string name = {});

Scenario parse_scenario(std::string_view bytes, TraceFormat format,
                        std::string name = {});

/// Guesses the format from content: a leading '<' (after whitespace/BOM) means XML.
TraceFormat detect_format(std::string_view bytes);

/// Inverse of parse_csv. Numbers use shortest round-trip formatting, so
/// parse_csv(to_csv(s)) == s field for field.
std::string to_csv(const Scenario& s);

ValidationReport validate_scenario(const Scenario& s);

/// Median of consecutive time deltas; 1.0 with fewer than two timesteps.
double nominal_dt(const std::vector<Timestep>& timesteps);

/// Reduces an angle in degrees into [0, 360).
double normalize_angle(double degrees);

}  // namespace cvanet
