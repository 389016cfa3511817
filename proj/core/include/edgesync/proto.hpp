#pragma once

// Edge <-> cloud wire protocol.
//
// Frame:   "ESY1" | u32 payload length (LE) | payload
// Payload: u8 variant tag | fields in declaration order
//
// Integers are little-endian, reals are IEEE-754 binary64 little-endian,
// strings and vectors carry a u32 element count. See docs/protocol.md for
// worked examples.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "edgesync/types.hpp"

namespace edgesync::proto {

inline constexpr std::array<std::uint8_t, 4> kMagic{'E', 'S', 'Y', '1'};
inline constexpr std::size_t kHeaderSize = 8;
inline constexpr std::size_t kMaxPayload = 64u * 1024u * 1024u;

enum class Tag : std::uint8_t {
  SampleBatch = 1,
  ModelUpdate = 2,
  UpdateAck = 3,
  Register = 4,
  RequestBatch = 5,
};

/// One filtered sample as uploaded: features plus the edge's own inference.
struct UploadedSample {
  std::uint64_t seq = 0;
  double timestamp = 0.0;
  std::vector<double> features;
  std::vector<double> probs;
  std::uint32_t predicted = 0;

  bool operator==(const UploadedSample&) const = default;
};

struct SampleBatch {
  /// Throws InvalidArgument for an empty sample list.
  SampleBatch(EdgeId edge_id, std::uint64_t window_id, std::vector<UploadedSample> samples);

  EdgeId edge_id;
  std::uint64_t window_id;
  std::vector<UploadedSample> samples;

  bool operator==(const SampleBatch&) const = default;
};

/// Full trainable partition for the given version (cloud -> edge).
struct ModelUpdate {
  EdgeId edge_id;
  std::uint64_t version = 0;
  std::vector<double> trainable_values;

  bool operator==(const ModelUpdate&) const = default;
};

struct UpdateAck {
  EdgeId edge_id;
  std::uint64_t version = 0;

  bool operator==(const UpdateAck&) const = default;
};

struct Register {
  EdgeId edge_id;
  std::uint32_t feature_dim = 0;
  std::uint32_t class_count = 0;
  std::uint64_t frozen_checksum = 0;

  bool operator==(const Register&) const = default;
};

/// Coordinator asks an edge to close its current window and upload.
struct RequestBatch {
  std::uint64_t cycle_id = 0;

  bool operator==(const RequestBatch&) const = default;
};

using Message = std::variant<SampleBatch, ModelUpdate, UpdateAck, Register, RequestBatch>;

Tag tag_of(const Message& msg) noexcept;
const char* to_string(Tag tag) noexcept;

/// Canonical frame bytes. Throws OversizePayload beyond kMaxPayload.
std::vector<std::uint8_t> encode(const Message& msg);

/// Exact inverse of encode. Throws BadMagic, Truncated, UnknownVariant,
/// TrailingBytes or OversizePayload; never reads out of bounds.
Message decode(std::span<const std::uint8_t> bytes);

/// Payload length announced by a frame header (first kHeaderSize bytes).
/// Throws BadMagic / Truncated / OversizePayload.
std::uint32_t read_header(std::span<const std::uint8_t> header);

/// Append-only little-endian writer.
class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void f64s(std::span<const double> v);

  std::vector<std::uint8_t>& bytes() noexcept { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

/// Bounds-checked reader; every overrun raises Truncated.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  std::vector<double> f64s();

  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

// Canonical encodings of the shared domain types, used by the message
// codec and for bitwise comparisons in tests.
void write(Writer& w, const Sample& v);
void write(Writer& w, const InferenceOutput& v);
void write(Writer& w, const HyperParams& v);
void write(Writer& w, const FilterConfig& v);
void write(Writer& w, const ModelParams& v);
void write(Writer& w, const AccuracyRecord& v);
void write(Writer& w, const ScoredSample& v);

Sample read_sample(Reader& r);
InferenceOutput read_inference_output(Reader& r);
HyperParams read_hyperparams(Reader& r);
FilterConfig read_filter_config(Reader& r);
ModelParams read_model_params(Reader& r);
AccuracyRecord read_accuracy_record(Reader& r);
ScoredSample read_scored_sample(Reader& r, const FilterConfig& cfg);

}  // namespace edgesync::proto
