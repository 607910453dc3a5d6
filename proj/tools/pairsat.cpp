// Command-line front end: batch campaigns, archive analysis, codec helpers
// and the ops server.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>

#include <CLI11.hpp>
#include <json.hpp>

#include "pairsat/archive.hpp"
#include "pairsat/config.hpp"
#include "pairsat/error.hpp"
#include "pairsat/mission.hpp"
#include "pairsat/onboard_file.hpp"
#include "pairsat/server.hpp"
#include "pairsat/telemetry.hpp"

using namespace pairsat;
using nlohmann::json;

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

MissionConfig config_or_default(const std::string& path) {
  return path.empty() ? MissionConfig{} : load_config_file(path);
}

int fail(const std::string& code, const std::string& message, int status = 2) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairsat: photon-pair payload mission simulator"};
  app.require_subcommand(1);

  std::string config_path, schedule_path, out_dir, in_dir, image_path, addr = "127.0.0.1:8080";
  double days = 40.0, from = 0.0;
  std::uint64_t seed = 0;
  std::size_t count = 5;
  unsigned file_id = 1;
  bool hex = false;

  auto* simulate = app.add_subcommand("simulate", "run a batch campaign and write its archive");
  simulate->add_option("--config", config_path, "mission config JSON");
  simulate->add_option("--days", days, "campaign length in days")->check(CLI::NonNegativeNumber);
  simulate->add_option("--schedule", schedule_path, "command schedule JSON");
  auto* seed_opt = simulate->add_option("--seed", seed, "override the config seed");
  simulate->add_option("--out", out_dir, "archive directory")->required();

  auto* analyze = app.add_subcommand("analyze", "re-analyze the images in an archive");
  analyze->add_option("--in", in_dir, "archive directory")->required();
  analyze->add_option("--out", out_dir, "report directory")->required();
  analyze->add_option("--config", config_path, "mission config JSON (analysis options)");

  auto* decode = app.add_subcommand("decode-file", "dump an onboard file image");
  decode->add_option("image", image_path)->required();
  decode->add_flag("--hex", hex, "print the 64-byte header as hex as well");

  auto* frames = app.add_subcommand("frames", "frame codec");
  frames->require_subcommand(1);
  std::string frames_in, frames_out;
  auto* encode_cmd = frames->add_subcommand("encode", "split an image into a frame stream");
  encode_cmd->add_option("image", frames_in)->required();
  encode_cmd->add_option("--file-id", file_id)->check(CLI::Range(0, 65535));
  encode_cmd->add_option("--out", frames_out)->required();
  auto* decode_cmd = frames->add_subcommand("decode", "reassemble an image from a frame stream");
  decode_cmd->add_option("stream", frames_in)->required();
  decode_cmd->add_option("--file-id", file_id)->check(CLI::Range(0, 65535));
  decode_cmd->add_option("--out", frames_out)->required();

  auto* passes = app.add_subcommand("passes", "list ground-station passes");
  passes->add_option("--from", from, "start, seconds since launch")->check(CLI::NonNegativeNumber);
  passes->add_option("--count", count);
  passes->add_option("--config", config_path);

  auto* serve = app.add_subcommand("serve", "run the HTTP operations API");
  serve->add_option("--config", config_path);
  serve->add_option("--addr", addr, "host:port");

  auto* print_config = app.add_subcommand("print-config", "print the effective mission config");
  print_config->add_option("--config", config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), e.get_exit_code() == 0 ? 2 : e.get_exit_code());
  }

  try {
    if (*simulate) {
      auto config = config_or_default(config_path);
      if (*seed_opt) config.seed = seed;
      const auto schedule =
          schedule_path.empty() ? std::vector<mission::Command>{} : mission::load_schedule_file(schedule_path);
      const auto m = mission::run_campaign(config, days, schedule);
      archive::write_archive(*m, out_dir);
      std::cout << json{{"files", m->archive().size()}, {"events", m->events().size()}, {"out", out_dir}}.dump() << "\n";
    } else if (*analyze) {
      const auto config = config_or_default(config_path);
      const auto report = archive::analyze_archive(in_dir, config.analysis);
      archive::write_report(report, out_dir);
      std::cout << json{{"files", report.files.size()}, {"out", out_dir}}.dump() << "\n";
    } else if (*decode) {
      const auto bytes = read_file(image_path);
      const auto file = payload::decode_file(bytes);
      auto j = archive::to_json(file);
      if (hex) {
        std::string h;
        char buf[4];
        for (std::size_t i = 0; i < payload::kHeaderSize; ++i) {
          std::snprintf(buf, sizeof buf, "%02x", bytes[i]);
          h += buf;
        }
        j["header_hex"] = h;
      }
      std::cout << j.dump(2) << "\n";
    } else if (*encode_cmd) {
      const auto bytes = read_file(frames_in);
      std::vector<std::uint8_t> stream;
      for (const auto& f : link::frame_file(bytes, static_cast<std::uint16_t>(file_id))) {
        const auto raw = link::encode_frame(f);
        stream.insert(stream.end(), raw.begin(), raw.end());
      }
      write_file(frames_out, stream);
      std::cout << json{{"frames", stream.size() / link::kFrameSize}}.dump() << "\n";
    } else if (*decode_cmd) {
      const auto bytes = read_file(frames_in);
      link::FrameStreamDecoder decoder;
      decoder.push(bytes);
      const auto got = decoder.take_frames();
      const auto result = link::reassemble(got, static_cast<std::uint16_t>(file_id));
      if (!result.file) {
        std::cerr << json{{"error", "incomplete"},
                          {"message", "frames missing"},
                          {"missing", result.missing},
                          {"rejected", decoder.rejected()}}
                         .dump()
                  << "\n";
        return 3;
      }
      write_file(frames_out, *result.file);
      std::cout << json{{"frames", got.size()}, {"rejected", decoder.rejected()}}.dump() << "\n";
    } else if (*passes) {
      const auto config = config_or_default(config_path);
      json rows = json::array();
      for (const auto& p : env::next_passes(static_cast<std::int64_t>(from), count, config.station, config.orbit))
        rows.push_back(archive::to_json(p));
      std::cout << rows.dump(2) << "\n";
    } else if (*serve) {
      const auto colon = addr.rfind(':');
      if (colon == std::string::npos) return fail("usage", "--addr must be host:port");
      int port = 0;
      try {
        port = std::stoi(addr.substr(colon + 1));
      } catch (const std::exception&) {
        return fail("usage", "--addr must be host:port");
      }
      server::OpsServer ops(config_or_default(config_path));
      std::cerr << "serving on " << addr << "\n";
      ops.listen(addr.substr(0, colon), port);
    } else if (*print_config) {
      std::cout << dump_config(config_or_default(config_path)) << "\n";
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
