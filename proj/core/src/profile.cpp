#include <algorithm>

#include "edgesync/error.hpp"
#include "edgesync/harness.hpp"
#include "log.hpp"

namespace edgesync {
namespace {

// Advances a simulated clock by one second per epoch so the trainer's time
// cap becomes an epoch cap.
class EpochCounted final : public TrainableModel {
 public:
  EpochCounted(TrainableModel& inner, SimClock& clock) : inner_(inner), clock_(clock) {}

  void begin_session() override { inner_.begin_session(); }
  double train_epoch(std::span<const LabeledSample> batch, const HyperParams& h) override {
    const double loss = inner_.train_epoch(batch, h);
    clock_.advance(1.0);
    return loss;
  }
  double evaluate(std::span<const LabeledSample> holdout) const override {
    return inner_.evaluate(holdout);
  }
  std::vector<double> trainable_values() const override { return inner_.trainable_values(); }
  void set_trainable_values(std::span<const double> values) override {
    inner_.set_trainable_values(values);
  }

 private:
  TrainableModel& inner_;
  SimClock& clock_;
};

std::vector<std::size_t> segment_starts(std::size_t n, std::size_t length, std::size_t count) {
  std::vector<std::size_t> out;
  if (n <= length) return {0};
  for (std::size_t i = 0; i < count; ++i) {
    const double centre = (static_cast<double>(i) + 0.5) * static_cast<double>(n) / static_cast<double>(count);
    const double start = std::clamp(centre - static_cast<double>(length) / 2.0, 0.0,
                                    static_cast<double>(n - length));
    out.push_back(static_cast<std::size_t>(start));
  }
  return out;
}

}  // namespace

double score_hyperparams(const ExperimentConfig& cfg, const StudentModel& start,
                         const HyperParams& h, std::span<const LabeledSample> segment,
                         int max_epochs) {
  StudentModel model = start;
  SimClock clock;
  EpochCounted counted(model, clock);
  TrainerConfig tcfg = cfg.coordinator.trainer;
  tcfg.hyperparams = h;
  tcfg.max_time = static_cast<double>(max_epochs);
  return train_until_stop(counted, segment, tcfg, clock).best_eval;
}

Profile profile_offline(const ExperimentConfig& cfg, const ProfileConfig& pcfg, std::uint64_t seed) {
  cfg.validate();
  pcfg.bho.validate();
  pcfg.refine.validate();
  if (pcfg.segments == 0 || pcfg.segment_length == 0 || pcfg.max_epochs < 1) {
    throw Error(Errc::Config, "profile segments, segment_length and max_epochs must be positive");
  }

  // Every setting is scored from the same untrained head so that workloads
  // are compared on equal footing.
  const StudentModel start(make_initial_params(cfg.model.dims, cfg.model.frozen_seed), seed,
                           cfg.model.batch_size);
  const Teacher teacher(cfg.model.dims.class_count, cfg.teacher_error_rate, cfg.teacher_seed);

  Profile profile;
  profile.seed = seed;
  std::vector<std::vector<LabeledSample>> labeled;
  std::vector<bho::Point> bests;
  for (std::size_t w = 0; w < cfg.workloads.size(); ++w) {
    const auto spec = instantiate_workload(cfg.workloads[w], cfg.model, seed);
    std::vector<LabeledSample> data;
    for (const auto& s : generate_stream(spec)) data.push_back(LabeledSample{s.features, teacher.label(s)});

    std::vector<std::span<const LabeledSample>> segments;
    for (auto begin : segment_starts(data.size(), pcfg.segment_length, pcfg.segments)) {
      const auto len = std::min(pcfg.segment_length, data.size() - begin);
      segments.emplace_back(data.data() + begin, len);
    }
    const bho::Objective objective = [&](std::span<const double> point) {
      const auto h = pcfg.space.denormalize(point);
      double sum = 0.0;
      for (const auto& seg : segments) sum += score_hyperparams(cfg, start, h, seg, pcfg.max_epochs);
      return sum / static_cast<double>(segments.size());
    };
    bho::BhoConfig bcfg = pcfg.bho;
    bcfg.seed = pcfg.bho.seed ^ (seed * 0x9E3779B97F4A7C15ULL) ^ (w + 1);
    auto result = bho::bho_optimize(objective, bcfg);
    detail::logger().info("event=profile_workload edge={} best_value={:.4f} evaluations={}",
                          spec.edge_id, result.best_value, result.trace.size());
    bests.push_back(result.best_point);
    profile.workloads.push_back(WorkloadProfile{spec.edge_id, std::move(result)});
    labeled.push_back(std::move(data));
  }

  profile.aggregated = bho::aggregate_h0(bests, pcfg.space, pcfg.raw_mean);
  const bho::SegmentEvaluator evaluate = [&](const HyperParams& h,
                                             std::span<const LabeledSample> segment) {
    try {
      return score_hyperparams(cfg, start, h, segment, pcfg.max_epochs);
    } catch (const Error& e) {
      if (e.code() == Errc::ModelRejectedHyperparams) return 0.0;
      throw;
    }
  };
  bho::RefineConfig rcfg = pcfg.refine;
  rcfg.seed = pcfg.refine.seed ^ seed;
  profile.refine = bho::refine_minibatch(profile.aggregated, labeled, rcfg, pcfg.space, evaluate);
  profile.h0 = profile.refine.hyperparams;
  return profile;
}

}  // namespace edgesync
