#include "pairsat/telemetry.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "pairsat/bytes.hpp"
#include "pairsat/crc.hpp"
#include "pairsat/error.hpp"
#include "pairsat/onboard_file.hpp"

namespace pairsat::link {

namespace {

using bytes::get_be;
using bytes::put_be;

constexpr std::size_t kHeaderEnd = 10;
constexpr std::size_t kCrcOffset = kFrameSize - 2;

bool sync_at(std::span<const std::uint8_t> bytes, std::size_t at) {
  return at + kSyncMarker.size() <= bytes.size() &&
         std::equal(kSyncMarker.begin(), kSyncMarker.end(), bytes.begin() + static_cast<std::ptrdiff_t>(at));
}

}  // namespace

std::size_t frames_per_file(std::size_t file_size) {
  return (file_size + kFramePayloadSize - 1) / kFramePayloadSize;
}

std::vector<TelemetryFrame> frame_file(std::span<const std::uint8_t> file, std::uint16_t file_id) {
  if (file.size() != payload::kFileSize)
    throw Error("bad_size", "only 65536-byte onboard files can be framed, got " + std::to_string(file.size()));
  const std::size_t n = frames_per_file(file.size());
  std::vector<TelemetryFrame> frames(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& f = frames[i];
    f.file_id = file_id;
    f.seq = static_cast<std::uint16_t>(i);
    const std::size_t offset = i * kFramePayloadSize;
    const std::size_t len = std::min(kFramePayloadSize, file.size() - offset);
    f.payload_len = static_cast<std::uint8_t>(len);
    std::copy_n(file.begin() + static_cast<std::ptrdiff_t>(offset), len, f.payload.begin());
  }
  return frames;
}

FrameBytes encode_frame(const TelemetryFrame& frame) {
  FrameBytes out{};
  std::span<std::uint8_t> view(out);
  std::copy(kSyncMarker.begin(), kSyncMarker.end(), out.begin());
  out[4] = frame.version_type;
  put_be<std::uint16_t>(view, 5, frame.file_id);
  put_be<std::uint16_t>(view, 7, frame.seq);
  out[9] = frame.payload_len;
  std::copy(frame.payload.begin(), frame.payload.end(), out.begin() + kHeaderEnd);
  put_be<std::uint16_t>(view, kCrcOffset, crc16_ccitt_false(view.subspan(4, kCrcOffset - 4)));
  return out;
}

TelemetryFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kSyncMarker.size() && std::equal(bytes.begin(), bytes.end(), kSyncMarker.begin()))
    throw Error("truncated", "frame shorter than sync marker");
  if (!sync_at(bytes, 0)) throw Error("no_sync", "frame does not start with sync marker");
  if (bytes.size() < kFrameSize)
    throw Error("truncated", "frame is " + std::to_string(bytes.size()) + " bytes, expected 252");
  if (get_be<std::uint16_t>(bytes, kCrcOffset) != crc16_ccitt_false(bytes.subspan(4, kCrcOffset - 4)))
    throw Error("crc_mismatch", "frame CRC mismatch");

  TelemetryFrame f;
  f.version_type = bytes[4];
  f.file_id = get_be<std::uint16_t>(bytes, 5);
  f.seq = get_be<std::uint16_t>(bytes, 7);
  f.payload_len = bytes[9];
  if (f.version_type != kFrameVersionType) throw Error("malformed", "unknown frame version/type");
  if (f.payload_len > kFramePayloadSize) throw Error("malformed", "payload length over 240");
  std::copy_n(bytes.begin() + kHeaderEnd, kFramePayloadSize, f.payload.begin());
  return f;
}

void FrameStreamDecoder::push(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  drain();
}

std::vector<TelemetryFrame> FrameStreamDecoder::take_frames() {
  std::vector<TelemetryFrame> out;
  out.swap(frames_);
  return out;
}

void FrameStreamDecoder::drain() {
  std::size_t pos = 0;
  while (true) {
    // Hunt for the next sync marker.
    std::size_t start = pos;
    while (start + kSyncMarker.size() <= buffer_.size() && !sync_at(buffer_, start)) ++start;
    if (start + kSyncMarker.size() > buffer_.size()) {
      // Keep a possible partial marker at the tail.
      const std::size_t keep = std::min<std::size_t>(kSyncMarker.size() - 1, buffer_.size() - pos);
      skipped_ += buffer_.size() - pos - keep;
      pos = buffer_.size() - keep;
      break;
    }
    skipped_ += start - pos;
    pos = start;
    if (buffer_.size() - pos < kFrameSize) break;
    try {
      frames_.push_back(decode_frame(std::span<const std::uint8_t>(buffer_).subspan(pos, kFrameSize)));
      pos += kFrameSize;
    } catch (const Error&) {
      ++rejected_;
      ++skipped_;
      ++pos;  // false sync or corrupt frame: resume the hunt one byte later
    }
  }
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
}

ReassemblyResult reassemble(std::span<const TelemetryFrame> frames, std::uint16_t file_id) {
  const std::size_t expected = frames_per_file(payload::kFileSize);
  std::map<std::uint16_t, const TelemetryFrame*> by_seq;
  for (const auto& f : frames) {
    if (f.file_id != file_id)
      throw Error("file_id_mismatch", "frame for file " + std::to_string(f.file_id) + " in reassembly of " +
                                          std::to_string(file_id));
    if (f.seq >= expected) throw Error("malformed", "frame seq beyond end of file");
    auto [it, inserted] = by_seq.emplace(f.seq, &f);
    if (!inserted && !(*it->second == f))
      throw Error("integrity_error", "conflicting duplicate of frame " + std::to_string(f.seq));
  }

  ReassemblyResult result;
  for (std::size_t seq = 0; seq < expected; ++seq)
    if (!by_seq.contains(static_cast<std::uint16_t>(seq))) result.missing.push_back(static_cast<std::uint16_t>(seq));
  if (!result.missing.empty()) return result;

  std::vector<std::uint8_t> image;
  image.reserve(expected * kFramePayloadSize);
  for (const auto& [seq, f] : by_seq)
    image.insert(image.end(), f->payload.begin(), f->payload.begin() + f->payload_len);
  if (image.size() < payload::kFileSize) {
    result.missing.push_back(static_cast<std::uint16_t>(expected - 1));
    return result;
  }
  image.resize(payload::kFileSize);
  result.file = std::move(image);
  return result;
}

void apply_bit_errors(std::span<std::uint8_t> bytes, double ber, Rng& rng) {
  if (ber <= 0.0 || bytes.empty()) return;
  const auto n_bits = static_cast<std::uint64_t>(bytes.size()) * 8;
  std::binomial_distribution<std::uint64_t> flips(n_bits, ber);
  const std::uint64_t k = flips(rng);
  std::uniform_int_distribution<std::uint64_t> pick(0, n_bits - 1);
  std::unordered_set<std::uint64_t> chosen;
  while (chosen.size() < k) chosen.insert(pick(rng));
  // Sort so the flip order never depends on hash-set iteration.
  std::vector<std::uint64_t> ordered(chosen.begin(), chosen.end());
  std::sort(ordered.begin(), ordered.end());
  for (auto bit : ordered) bytes[bit / 8] ^= static_cast<std::uint8_t>(1U << (bit % 8));
}

Downlink::Downlink(std::vector<TelemetryFrame> frames, double bit_error_rate, FileVerifier verify)
    : frames_(std::move(frames)), ber_(bit_error_rate), verify_(std::move(verify)) {
  if (!(ber_ >= 0.0 && ber_ < 1.0)) throw Error("invalid_argument", "bit error rate must be in [0, 1)");
  if (frames_.empty()) throw Error("invalid_argument", "nothing to downlink");
  session_.file_id = frames_.front().file_id;
}

double Downlink::completion_fraction() const {
  return static_cast<double>(received_.size()) / static_cast<double>(frames_.size());
}

std::vector<std::uint8_t> Downlink::file() const {
  std::vector<TelemetryFrame> frames;
  frames.reserve(received_.size());
  for (const auto& [seq, f] : received_) frames.push_back(f);
  auto result = reassemble(frames, session_.file_id);
  if (!result.file) throw Error("incomplete", "downlink not complete");
  return *result.file;
}

void Downlink::refill_sweep(double now, std::vector<LinkEvent>* events) {
  for (const auto& f : frames_)
    if (!received_.contains(f.seq)) sweep_.push_back(f.seq);
  if (!sweep_.empty()) return;

  // Every frame is in: check the file end-to-end before acknowledging.
  const auto image = file();
  if (!verify_ || verify_(image)) {
    session_.completed = true;
    session_.completed_at = now;
    if (events) events->push_back({now, "downlink_complete", 0, ""});
    return;
  }
  ++session_.integrity_resets;
  if (events) events->push_back({now, "integrity_reset", 0, "file check failed, requesting full retransmission"});
  received_.clear();
  session_.frames_acked = 0;
  for (const auto& f : frames_) sweep_.push_back(f.seq);
}

void Downlink::transmit(double window_start, double window_end, double hard_end, Rng& rng,
                        std::vector<LinkEvent>* events) {
  if (session_.completed) return;
  // An idle transmitter at the window start means a new contact began.
  const bool new_contact = session_.passes_used.empty() || window_start > next_tx_ + 1e-9;
  double t = std::max(next_tx_, window_start);
  if (new_contact) session_.passes_used.push_back({t, t, 0});
  auto& use = session_.passes_used.back();

  while (t < window_end && t + kFrameAirtimeS <= hard_end + 1e-9) {
    if (sweep_.empty()) {
      refill_sweep(t, events);
      if (session_.completed) break;
    }
    const std::uint16_t seq = sweep_.front();
    sweep_.pop_front();

    auto wire = encode_frame(frames_[seq]);
    apply_bit_errors(wire, ber_, rng);
    ++session_.frames_sent;
    ++use.frames_sent;
    session_.bits_on_air += kFrameSize * 8;
    try {
      const auto frame = decode_frame(wire);
      if (frame.file_id == session_.file_id && frame.seq < frames_.size() && !received_.contains(frame.seq)) {
        received_.emplace(frame.seq, frame);
        ++session_.frames_acked;
      }
    } catch (const Error& e) {
      ++session_.frames_lost;
      if (events) events->push_back({t, "frame_lost", seq, e.code()});
    }
    t += kFrameAirtimeS;
    use.end = t;
  }
  // The last frame may have completed the set; close out without extra airtime.
  if (!session_.completed && sweep_.empty() && received_.size() == frames_.size()) refill_sweep(t, events);
  next_tx_ = t;
}

DownlinkOutcome simulate_downlink(std::vector<TelemetryFrame> frames, std::span<const env::Pass> passes,
                                  double bit_error_rate, Rng& rng, FileVerifier verify) {
  Downlink link(std::move(frames), bit_error_rate, std::move(verify));
  for (const auto& p : passes) {
    if (link.complete()) break;
    const auto aos = static_cast<double>(p.aos_epoch), los = static_cast<double>(p.los_epoch);
    link.transmit(aos, los, los, rng);
  }
  DownlinkOutcome out;
  out.received = link.received();
  out.session = link.session();
  if (link.complete()) out.file = link.file();
  return out;
}

}  // namespace pairsat::link
