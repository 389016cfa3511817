#include "edgesync/proto.hpp"

#include <bit>
#include <cstring>

#include "edgesync/error.hpp"

namespace edgesync::proto {
namespace {

template <typename... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <typename... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void write_uploaded(Writer& w, const UploadedSample& s) {
  w.u64(s.seq);
  w.f64(s.timestamp);
  w.f64s(s.features);
  w.f64s(s.probs);
  w.u32(s.predicted);
}

UploadedSample read_uploaded(Reader& r) {
  UploadedSample s;
  s.seq = r.u64();
  s.timestamp = r.f64();
  s.features = r.f64s();
  s.probs = r.f64s();
  s.predicted = r.u32();
  return s;
}

void write_payload(Writer& w, const Message& msg) {
  w.u8(static_cast<std::uint8_t>(tag_of(msg)));
  std::visit(Overloaded{
                 [&](const SampleBatch& m) {
                   if (m.samples.empty()) {
                     throw Error(Errc::InvalidArgument, "SampleBatch must not be empty");
                   }
                   w.str(m.edge_id);
                   w.u64(m.window_id);
                   w.u32(static_cast<std::uint32_t>(m.samples.size()));
                   for (const auto& s : m.samples) write_uploaded(w, s);
                 },
                 [&](const ModelUpdate& m) {
                   w.str(m.edge_id);
                   w.u64(m.version);
                   w.f64s(m.trainable_values);
                 },
                 [&](const UpdateAck& m) {
                   w.str(m.edge_id);
                   w.u64(m.version);
                 },
                 [&](const Register& m) {
                   w.str(m.edge_id);
                   w.u32(m.feature_dim);
                   w.u32(m.class_count);
                   w.u64(m.frozen_checksum);
                 },
                 [&](const RequestBatch& m) { w.u64(m.cycle_id); },
             },
             msg);
}

Message read_payload(Reader& r) {
  const std::uint8_t tag = r.u8();
  switch (static_cast<Tag>(tag)) {
    case Tag::SampleBatch: {
      auto edge = r.str();
      const auto window = r.u64();
      const auto count = r.u32();
      // Each sample needs at least 28 bytes; reject absurd counts before allocating.
      if (count > r.remaining() / 28) throw Error(Errc::Truncated, "sample count exceeds payload");
      std::vector<UploadedSample> samples;
      samples.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) samples.push_back(read_uploaded(r));
      if (samples.empty()) throw Error(Errc::InvalidArgument, "SampleBatch must not be empty");
      return SampleBatch(std::move(edge), window, std::move(samples));
    }
    case Tag::ModelUpdate: {
      ModelUpdate m;
      m.edge_id = r.str();
      m.version = r.u64();
      m.trainable_values = r.f64s();
      return m;
    }
    case Tag::UpdateAck: {
      UpdateAck m;
      m.edge_id = r.str();
      m.version = r.u64();
      return m;
    }
    case Tag::Register: {
      Register m;
      m.edge_id = r.str();
      m.feature_dim = r.u32();
      m.class_count = r.u32();
      m.frozen_checksum = r.u64();
      return m;
    }
    case Tag::RequestBatch:
      return RequestBatch{r.u64()};
  }
  throw Error(Errc::UnknownVariant, "unknown message tag " + std::to_string(tag));
}

}  // namespace

SampleBatch::SampleBatch(EdgeId edge, std::uint64_t window, std::vector<UploadedSample> items)
    : edge_id(std::move(edge)), window_id(window), samples(std::move(items)) {
  if (samples.empty()) throw Error(Errc::InvalidArgument, "SampleBatch must not be empty");
}

Tag tag_of(const Message& msg) noexcept {
  return static_cast<Tag>(msg.index() + 1);
}

const char* to_string(Tag tag) noexcept {
  switch (tag) {
    case Tag::SampleBatch: return "SampleBatch";
    case Tag::ModelUpdate: return "ModelUpdate";
    case Tag::UpdateAck: return "UpdateAck";
    case Tag::Register: return "Register";
    case Tag::RequestBatch: return "RequestBatch";
  }
  return "Unknown";
}

void Writer::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

void Writer::f64s(std::span<const double> v) {
  u32(static_cast<std::uint32_t>(v.size()));
  for (double x : v) f64(x);
}

std::span<const std::uint8_t> Reader::take(std::size_t n) {
  if (n > remaining()) throw Error(Errc::Truncated, "payload ends early");
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t Reader::u8() { return take(1)[0]; }

std::uint32_t Reader::u32() {
  const auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t Reader::u64() {
  const auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::str() {
  const auto n = u32();
  const auto b = take(n);
  return std::string(b.begin(), b.end());
}

std::vector<double> Reader::f64s() {
  const auto n = u32();
  if (n > remaining() / 8) throw Error(Errc::Truncated, "vector length exceeds payload");
  std::vector<double> v(n);
  for (auto& x : v) x = f64();
  return v;
}

std::vector<std::uint8_t> encode(const Message& msg) {
  Writer payload;
  write_payload(payload, msg);
  const auto& body = payload.bytes();
  if (body.size() > kMaxPayload) {
    throw Error(Errc::OversizePayload, std::to_string(body.size()) + " byte payload");
  }
  Writer frame;
  auto& out = frame.bytes();
  out.reserve(kHeaderSize + body.size());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  frame.u32(static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return std::move(out);
}

std::uint32_t read_header(std::span<const std::uint8_t> header) {
  if (header.size() < kHeaderSize) {
    // A short prefix that already disagrees with the magic is a magic error.
    if (std::memcmp(header.data(), kMagic.data(), std::min(header.size(), kMagic.size())) != 0) {
      throw Error(Errc::BadMagic, "frame does not start with ESY1");
    }
    throw Error(Errc::Truncated, "frame header incomplete");
  }
  if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(Errc::BadMagic, "frame does not start with ESY1");
  }
  Reader r(header.subspan(4, 4));
  const auto len = r.u32();
  if (len > kMaxPayload) throw Error(Errc::OversizePayload, std::to_string(len) + " byte payload");
  return len;
}

Message decode(std::span<const std::uint8_t> bytes) {
  const auto len = read_header(bytes);
  const auto rest = bytes.subspan(kHeaderSize);
  if (rest.size() < len) throw Error(Errc::Truncated, "payload shorter than announced length");
  if (rest.size() > len) throw Error(Errc::TrailingBytes, "bytes after the frame payload");
  Reader r(rest);
  auto msg = read_payload(r);
  if (r.remaining() != 0) throw Error(Errc::TrailingBytes, "payload longer than its message");
  return msg;
}

// Domain type encodings.

void write(Writer& w, const Sample& v) {
  w.str(v.edge_id);
  w.u64(v.seq);
  w.f64(v.timestamp);
  w.f64s(v.features);
  w.u32(v.true_class);
}

void write(Writer& w, const InferenceOutput& v) { w.f64s(v.probs()); }

void write(Writer& w, const HyperParams& v) {
  w.f64(v.learning_rate());
  w.f64(v.momentum());
  w.f64(v.weight_decay());
}

void write(Writer& w, const FilterConfig& v) {
  w.f64(v.alpha());
  w.f64(v.beta());
  w.f64(v.keep_fraction());
  w.f64(v.window_seconds());
  w.u8(static_cast<std::uint8_t>(v.direction()));
}

void write(Writer& w, const ModelParams& v) {
  w.u64(v.dims().feature_dim);
  w.u64(v.dims().hidden_dim);
  w.u64(v.dims().class_count);
  w.f64s(v.frozen());
  w.f64s(v.trainable());
  w.u64(v.version());
}

void write(Writer& w, const AccuracyRecord& v) {
  w.u8(v.correct);
  w.u64(v.seq);
}

void write(Writer& w, const ScoredSample& v) {
  write(w, v.sample());
  write(w, v.output());
  w.f64(v.adaptability());
  w.f64(v.timeliness());
  w.f64(v.quality());
}

Sample read_sample(Reader& r) {
  Sample s;
  s.edge_id = r.str();
  s.seq = r.u64();
  s.timestamp = r.f64();
  s.features = r.f64s();
  s.true_class = r.u32();
  return s;
}

InferenceOutput read_inference_output(Reader& r) { return InferenceOutput(r.f64s()); }

HyperParams read_hyperparams(Reader& r) {
  const double lr = r.f64();
  const double momentum = r.f64();
  const double wd = r.f64();
  return HyperParams(lr, momentum, wd);
}

FilterConfig read_filter_config(Reader& r) {
  const double alpha = r.f64();
  const double beta = r.f64();
  const double keep = r.f64();
  const double window = r.f64();
  const auto dir = r.u8();
  if (dir > 1) throw Error(Errc::UnknownVariant, "timeliness direction");
  return FilterConfig(alpha, beta, keep, window, static_cast<TimelinessDirection>(dir));
}

ModelParams read_model_params(Reader& r) {
  ModelDims dims;
  dims.feature_dim = r.u64();
  dims.hidden_dim = r.u64();
  dims.class_count = r.u64();
  auto frozen = r.f64s();
  auto trainable = r.f64s();
  const auto version = r.u64();
  return ModelParams(dims, std::move(frozen), std::move(trainable), version);
}

AccuracyRecord read_accuracy_record(Reader& r) {
  const auto correct = r.u8();
  const auto seq = r.u64();
  return AccuracyRecord(correct, seq);
}

ScoredSample read_scored_sample(Reader& r, const FilterConfig& cfg) {
  auto sample = read_sample(r);
  auto output = read_inference_output(r);
  const double adapt = r.f64();
  const double timely = r.f64();
  const double quality = r.f64();
  return ScoredSample(std::move(sample), std::move(output), adapt, timely, quality, cfg);
}

}  // namespace edgesync::proto
