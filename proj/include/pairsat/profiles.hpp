#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "pairsat/optics.hpp"

namespace pairsat::payload {

/// Hard cap on the wall-clock length of one profile execution.
inline constexpr int kMaxProfileMinutes = 30;
/// How far a profile's nominal phase budgets may exceed the cap; the
/// controller trims the overrun from the heating budget at run time.
inline constexpr int kNominalOverrunMinutes = 1;

enum class PumpMode { off, constant_power, constant_current };
enum class MemoryType { flash, eeprom };

struct PumpSetting {
  PumpMode mode = PumpMode::off;
  double value = 0.0;  ///< mW for constant_power, mA for constant_current

  bool operator==(const PumpSetting&) const = default;
};

/// Laser diode optical output above threshold: P = slope * (I - threshold).
struct LasingCurve {
  double slope_mw_per_ma = 0.55;
  double threshold_ma = 19.0;

  double optical_mw(double current_ma) const;
};

struct ExperimentProfile {
  std::uint8_t id = 0;
  int heating_budget_min = 0;
  int dark_min = 0;
  int expt_min = 0;
  PumpSetting pump;
  MemoryType memory = MemoryType::flash;
  std::optional<double> turn_on_temp_c;
  optics::Arm rotated_arm = optics::Arm::signal;
  bool hv_variant = false;

  int nominal_minutes() const { return heating_budget_min + dark_min + expt_min; }
  /// Heating budget after trimming so the whole profile fits the 30 min cap.
  int effective_heating_s() const;

  bool operator==(const ExperimentProfile&) const = default;
};

using ProfileTable = std::map<std::uint8_t, ExperimentProfile>;

/// Parses the profile document (one CSV row per profile, '#' comments).
/// A trailing '*' on the id marks the alternate-HV variant, a trailing '†'
/// the idler-rotation variant. Throws pairsat::Error on malformed rows,
/// unknown or duplicate ids, and durations over the cap.
ProfileTable load_profiles(std::string_view document);

/// The shipped profile document (data/profiles.csv, compiled in).
std::string_view default_profiles_document();
const ProfileTable& default_profiles();

double pump_power_mw(const PumpSetting& pump, const LasingCurve& curve);

std::string format_profile_id(std::uint8_t id);
/// Accepts "0x10", "0X10", "16". Throws on anything else.
std::uint8_t parse_profile_id(std::string_view text);

std::string_view to_string(PumpMode mode);
std::string_view to_string(MemoryType memory);

}  // namespace pairsat::payload
