#include "edgesync/edge_agent.hpp"

#include "edgesync/error.hpp"

namespace edgesync {

EdgeAgent::EdgeAgent(EdgeId edge_id, StudentModel model, FilterConfig filter, double start_time)
    : edge_id_(std::move(edge_id)),
      model_(std::move(model)),
      filter_(filter),
      cache_(edge_id_, start_time) {}

InferenceRecord EdgeAgent::step(const Sample& sample, std::optional<std::uint32_t> teacher_label) {
  validate_sample(sample, model_.dims().feature_dim);
  if (sample.edge_id != edge_id_) {
    throw Error(Errc::InvalidArgument, "sample belongs to edge '" + sample.edge_id + "'");
  }
  order_.admit(sample);

  InferenceRecord rec{sample.seq, sample.timestamp, model_.infer(sample.features),
                      model_.version(), std::nullopt};
  ++total_inferences_;
  if (teacher_label) {
    const bool ok = rec.output.predicted() == *teacher_label;
    rec.correct = ok;
    ++window_scored_;
    if (ok) {
      ++window_correct_;
      ++total_correct_;
    }
  }
  cache_.push(sample, rec.output);
  return rec;
}

WindowClose EdgeAgent::close_window(double now) { return close_window(filter_, now); }

WindowClose EdgeAgent::close_window(const FilterConfig& cfg, double now) {
  WindowClose out;
  out.stats.window_id = window_id_;
  out.stats.cache_size = cache_.size();
  out.stats.scored = window_scored_;
  out.stats.correct = window_correct_;
  out.stats.version = model_.version();
  out.stats.window_start = cache_.window_start();
  out.stats.window_end = now;

  if (!cache_.empty()) {
    const double span = now - cache_.window_start();
    const FilterConfig effective = span > 0.0 ? cfg.with_window(span) : cfg;
    auto selected = filter_window(cache_, effective, now);
    std::vector<proto::UploadedSample> uploads;
    uploads.reserve(selected.size());
    for (const auto& s : selected) {
      uploads.push_back(proto::UploadedSample{s.sample().seq, s.sample().timestamp,
                                              s.sample().features, s.output().probs(),
                                              s.output().predicted()});
    }
    out.stats.uploaded = uploads.size();
    out.batch.emplace(edge_id_, window_id_, std::move(uploads));
  } else {
    cache_.clear(now);
  }
  ++window_id_;
  window_scored_ = 0;
  window_correct_ = 0;
  return out;
}

void EdgeAgent::apply_update(const proto::ModelUpdate& msg) {
  if (msg.edge_id != edge_id_) {
    throw Error(Errc::UnknownEdge, "update addressed to '" + msg.edge_id + "'");
  }
  const std::uint64_t current = model_.version();
  if (msg.version <= current) {
    throw Error(Errc::StaleVersion, "update v" + std::to_string(msg.version) +
                                        " not newer than v" + std::to_string(current));
  }
  if (msg.version != current + 1 && !awaiting_resync_) {
    throw Error(Errc::VersionGap, "update v" + std::to_string(msg.version) + " skips past v" +
                                      std::to_string(current + 1));
  }
  model_.load(msg.trainable_values, msg.version);
  awaiting_resync_ = false;
}

UpdateOutcome EdgeAgent::handle_update(const proto::ModelUpdate& msg) {
  try {
    apply_update(msg);
    return {UpdateStatus::Applied, proto::UpdateAck{edge_id_, version()}};
  } catch (const Error& e) {
    if (e.code() == Errc::StaleVersion) {
      return {UpdateStatus::Stale, proto::UpdateAck{edge_id_, version()}};
    }
    if (e.code() == Errc::VersionGap) {
      awaiting_resync_ = true;
      return {UpdateStatus::Gap, registration()};
    }
    throw;
  }
}

proto::Register EdgeAgent::registration() const {
  const auto params = model_.params();
  return proto::Register{edge_id_, static_cast<std::uint32_t>(params.dims().feature_dim),
                         static_cast<std::uint32_t>(params.dims().class_count),
                         params.frozen_checksum()};
}

}  // namespace edgesync
