#pragma once

#include <cstdint>
#include <filesystem>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

#include "pairsat/controller.hpp"
#include "pairsat/environment.hpp"
#include "pairsat/mission.hpp"
#include "pairsat/rng.hpp"

namespace testutil {

inline pairsat::payload::Environment constant_environment(double ambient_c, double elapsed_days = 0.0) {
  pairsat::payload::Environment e;
  e.ambient_c = [ambient_c](std::int64_t) { return ambient_c; };
  e.elapsed_days = [elapsed_days](std::int64_t) { return elapsed_days; };
  return e;
}

/// Runs one profile with the default models in a fixed ambient.
inline pairsat::payload::ProfileResult run_profile(std::uint8_t id, double ambient_c, double elapsed_days = 0.0,
                                                   std::uint64_t seed = 7,
                                                   pairsat::payload::ControllerConfig cfg = {}) {
  using namespace pairsat;
  auto counts = make_substream(seed, "counts");
  auto hops = make_substream(seed, "modehop");
  return payload::execute_profile(payload::default_profiles().at(id), 0,
                                  env::ThermalState::at_equilibrium(ambient_c),
                                  constant_environment(ambient_c, elapsed_days), optics::SourceModel{},
                                  optics::DetectorModel{}, cfg, env::PowerModel{}, counts, hops);
}

inline std::vector<pairsat::mission::Command> acceptance_schedule() {
  using pairsat::mission::Command;
  Command dark;
  dark.id = "dark-0";
  dark.profile_id = 0x37;
  Command science;
  science.id = "sci-36";
  science.profile_id = 0x10;
  science.submit_epoch = 35 * 86400;
  science.execute_epoch = 36 * 86400;
  return {dark, science};
}

inline std::string temp_dir(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("pairsat_test_" + name + "_" + std::to_string(::getpid())))
      .string();
}

}  // namespace testutil
