#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pairsat/environment.hpp"
#include "pairsat/rng.hpp"

namespace pairsat::link {

/// Downlink frame, big-endian fields:
///   0 sync 1A CF FC 1D (4) | 4 version/type (1) | 5 file id (2) | 7 seq (2)
///   | 9 payload length (1) | 10 payload, zero padded (240) | 250 CRC-16 (2)
/// The CRC is CRC-16/CCITT-FALSE over bytes 4..249.
inline constexpr std::array<std::uint8_t, 4> kSyncMarker{0x1A, 0xCF, 0xFC, 0x1D};
inline constexpr std::size_t kFrameSize = 252;
inline constexpr std::size_t kFramePayloadSize = 240;
inline constexpr std::uint8_t kFrameVersionType = 0x10;  // version 1, type 0 (file fragment)
inline constexpr double kBitRate = 1200.0;
inline constexpr double kFrameAirtimeS = kFrameSize * 8 / kBitRate;

struct TelemetryFrame {
  std::uint8_t version_type = kFrameVersionType;
  std::uint16_t file_id = 0;
  std::uint16_t seq = 0;
  std::uint8_t payload_len = 0;
  std::array<std::uint8_t, kFramePayloadSize> payload{};

  bool operator==(const TelemetryFrame&) const = default;
};

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

std::size_t frames_per_file(std::size_t file_size);

/// Splits a 65,536-byte onboard image into 274 frames. Throws bad_size otherwise.
std::vector<TelemetryFrame> frame_file(std::span<const std::uint8_t> file, std::uint16_t file_id);

FrameBytes encode_frame(const TelemetryFrame& frame);

/// Decodes one frame that starts at byte 0. Throws pairsat::Error with code
/// truncated, no_sync, crc_mismatch or malformed.
TelemetryFrame decode_frame(std::span<const std::uint8_t> bytes);

/// Byte-stream decoder that hunts for the sync marker, so garbage or corrupt
/// frames between good ones are skipped.
class FrameStreamDecoder {
 public:
  void push(std::span<const std::uint8_t> bytes);
  /// Frames decoded so far, in arrival order; drains the internal queue.
  std::vector<TelemetryFrame> take_frames();
  std::size_t rejected() const { return rejected_; }
  std::size_t skipped_bytes() const { return skipped_; }

 private:
  void drain();

  std::vector<std::uint8_t> buffer_;
  std::vector<TelemetryFrame> frames_;
  std::size_t rejected_ = 0;
  std::size_t skipped_ = 0;
};

struct ReassemblyResult {
  std::optional<std::vector<std::uint8_t>> file;
  std::vector<std::uint16_t> missing;  ///< sorted, empty when file is set
};

/// Orders payloads by seq into the 65,536-byte image, or reports the gaps.
/// Identical duplicates are accepted; conflicting ones throw integrity_error.
ReassemblyResult reassemble(std::span<const TelemetryFrame> frames, std::uint16_t file_id);

struct PassUse {
  double start = 0.0;
  double end = 0.0;
  std::uint64_t frames_sent = 0;
};

struct DownlinkSession {
  std::uint16_t file_id = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_acked = 0;
  std::uint64_t frames_lost = 0;
  std::uint64_t bits_on_air = 0;
  std::uint32_t integrity_resets = 0;
  bool completed = false;
  double completed_at = 0.0;
  std::vector<PassUse> passes_used;

  double on_air_s() const { return static_cast<double>(bits_on_air) / kBitRate; }
};

struct LinkEvent {
  double epoch = 0.0;
  std::string kind;  ///< frame_lost, integrity_reset, downlink_complete
  std::uint16_t seq = 0;
  std::string detail;
};

/// Whole-file check the ground runs once every frame has arrived.
using FileVerifier = std::function<bool(std::span<const std::uint8_t>)>;

/// Selective-repeat transfer of one file over a binary symmetric channel.
/// The spacecraft sweeps the ground's current gap list; once a sweep ends
/// the ground sends a fresh gap list.
class Downlink {
 public:
  Downlink(std::vector<TelemetryFrame> frames, double bit_error_rate, FileVerifier verify = {});

  /// Sends frames that start in [window_start, window_end) and finish by
  /// `hard_end` (LOS). Consecutive windows inside one pass continue the same
  /// transmitter timeline.
  void transmit(double window_start, double window_end, double hard_end, Rng& rng,
                std::vector<LinkEvent>* events = nullptr);

  bool complete() const { return session_.completed; }
  const DownlinkSession& session() const { return session_; }
  double completion_fraction() const;
  /// Reassembled image; only valid once complete().
  std::vector<std::uint8_t> file() const;
  const std::map<std::uint16_t, TelemetryFrame>& received() const { return received_; }

 private:
  void refill_sweep(double now, std::vector<LinkEvent>* events);

  std::vector<TelemetryFrame> frames_;
  double ber_;
  FileVerifier verify_;
  DownlinkSession session_;
  std::map<std::uint16_t, TelemetryFrame> received_;
  std::deque<std::uint16_t> sweep_;
  double next_tx_ = -1e300;
};

/// Flips each bit of `bytes` independently with probability `ber`.
void apply_bit_errors(std::span<std::uint8_t> bytes, double ber, Rng& rng);

struct DownlinkOutcome {
  std::map<std::uint16_t, TelemetryFrame> received;
  DownlinkSession session;
  std::optional<std::vector<std::uint8_t>> file;
};

/// Runs a transfer across a list of passes; may end incomplete.
DownlinkOutcome simulate_downlink(std::vector<TelemetryFrame> frames, std::span<const env::Pass> passes,
                                  double bit_error_rate, Rng& rng, FileVerifier verify = {});

}  // namespace pairsat::link
