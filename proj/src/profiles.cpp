#include "pairsat/profiles.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <vector>

#include "pairsat/error.hpp"

namespace pairsat::payload {

namespace {

constexpr std::array<std::uint8_t, 15> kKnownIds{0x10, 0x30, 0x31, 0x32, 0x33, 0x34, 0x35, 0x36,
                                                 0x37, 0x38, 0x39, 0x3A, 0x3B, 0x3C, 0x3D};
constexpr std::uint8_t kHvVariantId = 0x33;
constexpr std::uint8_t kIdlerVariantId = 0x38;
constexpr std::string_view kDagger = "\xE2\x80\xA0";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

[[noreturn]] void malformed(int line, const std::string& what) {
  throw Error("malformed_row", "profiles line " + std::to_string(line) + ": " + what);
}

double parse_number(std::string_view s, int line) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) malformed(line, "bad number '" + std::string(s) + "'");
  return v;
}

int parse_minutes(std::string_view s, int line) {
  const double v = parse_number(s, line);
  if (v < 0.0 || v != static_cast<int>(v)) malformed(line, "minutes must be a nonnegative integer");
  return static_cast<int>(v);
}

PumpSetting parse_pump(std::string_view s, int line) {
  const std::string t = lower(trim(s));
  if (t == "na") return {PumpMode::off, 0.0};
  auto ends_with = [&](std::string_view suffix) {
    return t.size() > suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("mw")) return {PumpMode::constant_power, parse_number(std::string_view(t).substr(0, t.size() - 2), line)};
  if (ends_with("ma")) return {PumpMode::constant_current, parse_number(std::string_view(t).substr(0, t.size() - 2), line)};
  malformed(line, "pump setting must be <n>mW, <n>mA or NA");
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

double LasingCurve::optical_mw(double current_ma) const {
  return std::max(0.0, slope_mw_per_ma * (current_ma - threshold_ma));
}

int ExperimentProfile::effective_heating_s() const {
  const int room = kMaxProfileMinutes - dark_min - expt_min;
  return std::max(0, std::min(heating_budget_min, room)) * 60;
}

double pump_power_mw(const PumpSetting& pump, const LasingCurve& curve) {
  switch (pump.mode) {
    case PumpMode::off: return 0.0;
    case PumpMode::constant_power: return pump.value;
    case PumpMode::constant_current: return curve.optical_mw(pump.value);
  }
  return 0.0;
}

std::string format_profile_id(std::uint8_t id) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "0x%02X", id);
  return buf;
}

std::uint8_t parse_profile_id(std::string_view text) {
  text = trim(text);
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    text.remove_prefix(2);
    base = 16;
  }
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || value > 0xFF)
    throw Error("bad_profile_id", "invalid profile id '" + std::string(text) + "'");
  return static_cast<std::uint8_t>(value);
}

std::string_view to_string(PumpMode mode) {
  switch (mode) {
    case PumpMode::off: return "off";
    case PumpMode::constant_power: return "constant_power";
    case PumpMode::constant_current: return "constant_current";
  }
  return "off";
}

std::string_view to_string(MemoryType memory) {
  return memory == MemoryType::flash ? "flash" : "eeprom";
}

ProfileTable load_profiles(std::string_view document) {
  ProfileTable table;
  int line_no = 0;
  for (auto raw : split(document, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split(line, ',');
    if (fields.size() != 7) malformed(line_no, "expected 7 fields, got " + std::to_string(fields.size()));

    ExperimentProfile p;
    auto id_text = trim(fields[0]);
    if (id_text.ends_with('*')) {
      p.hv_variant = true;
      id_text.remove_suffix(1);
    } else if (id_text.ends_with(kDagger)) {
      p.rotated_arm = optics::Arm::idler;
      id_text.remove_suffix(kDagger.size());
    }
    try {
      p.id = parse_profile_id(id_text);
    } catch (const Error&) {
      malformed(line_no, "bad profile id '" + std::string(id_text) + "'");
    }
    if (std::find(kKnownIds.begin(), kKnownIds.end(), p.id) == kKnownIds.end())
      throw Error("unknown_profile", "unknown profile id " + format_profile_id(p.id));
    if (p.hv_variant && p.id != kHvVariantId)
      malformed(line_no, "alternate-HV marker is only valid on " + format_profile_id(kHvVariantId));
    if (p.rotated_arm == optics::Arm::idler && p.id != kIdlerVariantId)
      malformed(line_no, "idler-rotation marker is only valid on " + format_profile_id(kIdlerVariantId));

    p.heating_budget_min = parse_minutes(fields[1], line_no);
    p.dark_min = parse_minutes(fields[2], line_no);
    p.expt_min = parse_minutes(fields[3], line_no);
    p.pump = parse_pump(fields[4], line_no);

    const std::string memory = lower(trim(fields[5]));
    if (memory == "flash") p.memory = MemoryType::flash;
    else if (memory == "eeprom") p.memory = MemoryType::eeprom;
    else malformed(line_no, "memory type must be Flash or EEPROM");

    if (lower(trim(fields[6])) != "na") p.turn_on_temp_c = parse_number(fields[6], line_no);

    if (p.expt_min > 0 && p.pump.mode == PumpMode::off)
      malformed(line_no, "experiment phase requires a pump setting");
    if (p.heating_budget_min > 0 && !p.turn_on_temp_c)
      malformed(line_no, "heating phase requires a turn-on temperature");
    if (p.nominal_minutes() > kMaxProfileMinutes + kNominalOverrunMinutes ||
        p.dark_min + p.expt_min > kMaxProfileMinutes)
      throw Error("duration_exceeded", format_profile_id(p.id) + " runs " +
                                           std::to_string(p.nominal_minutes()) +
                                           " min, over the 30 min cap");

    if (!table.emplace(p.id, p).second)
      throw Error("duplicate_profile", "duplicate profile id " + format_profile_id(p.id));
  }
  return table;
}

const ProfileTable& default_profiles() {
  static const ProfileTable table = load_profiles(default_profiles_document());
  return table;
}

}  // namespace pairsat::payload
