#include "edgesync/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>

#include "edgesync/edge_agent.hpp"
#include "edgesync/error.hpp"
#include "log.hpp"

namespace edgesync {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

// Salts so that streams, pretraining draws and scene means never share a seed.
constexpr std::uint64_t kStreamSalt = 0x5354524541'4dULL;
constexpr std::uint64_t kPretrainSalt = 0x5052455452'41ULL;
constexpr std::uint64_t kModelSalt = 0x4d4f44454cULL;

struct SimEdge {
  WorkloadSpec spec;
  std::vector<Sample> stream;
  std::vector<std::uint32_t> labels;
  EdgeAgent agent;
  std::size_t next = 0;
  std::deque<proto::ModelUpdate> inbox;
  std::deque<double> inbox_arrival;
  EdgeReport report;
};

class Simulation {
 public:
  Simulation(const ExperimentConfig& cfg, Strategy strategy, std::uint64_t seed)
      : cfg_(cfg), strategy_(strategy), seed_(seed), horizon_(cfg.horizon()) {
    cfg_.validate();
    labels_ = std::make_shared<StreamLabels>(cfg.model.dims.class_count, cfg.teacher_error_rate,
                                             cfg.teacher_seed);
    const Spend spend = [this](double s) { clock_.advance(s); };
    coordinator_ = std::make_unique<Coordinator>(cfg.coordinator, clock_, labels_, spend);

    const auto buckets = static_cast<std::size_t>(std::ceil(horizon_ / cfg.simulation.bucket_seconds));
    for (const auto& tpl : cfg.workloads) {
      auto spec = instantiate_workload(tpl, cfg.model, seed);
      auto stream = generate_stream(spec);
      labels_->add_stream(spec.edge_id, stream);
      std::vector<std::uint32_t> teacher;
      teacher.reserve(stream.size());
      for (const auto& s : stream) teacher.push_back(labels_->label(s));

      StudentModel model = initial_student(cfg, spec, seed);
      coordinator_->register_edge(
          EdgeAgent(spec.edge_id, model, cfg.filter).registration(), model);

      EdgeReport report;
      report.edge_id = spec.edge_id;
      for (std::size_t i = 1; i < spec.scenes.size(); ++i) {
        report.scene_changes.push_back(spec.scenes[i].start_time);
      }
      report.bucket_accuracy.assign(buckets, 0.0);
      report.bucket_counts.assign(buckets, 0);
      const EdgeId id = spec.edge_id;
      edges_.push_back(SimEdge{std::move(spec), std::move(stream), std::move(teacher),
                               EdgeAgent(id, std::move(model), cfg.filter), 0, {}, {},
                               std::move(report)});
    }
  }

  RunReport run() {
    switch (strategy_) {
      case Strategy::NoAdaptation:
        break;
      case Strategy::OneTimeAdaptation:
        run_one_time();
        break;
      case Strategy::FixedInterval:
        run_fixed_interval();
        break;
      case Strategy::EdgeSync:
        run_edgesync();
        break;
    }
    advance_edges(std::numeric_limits<double>::infinity());
    return finish();
  }

 private:
  void advance_edges(double until) {
    for (auto& e : edges_) {
      while (e.next < e.stream.size() && e.stream[e.next].timestamp < until) {
        const Sample& s = e.stream[e.next];
        while (!e.inbox.empty() && e.inbox_arrival.front() <= s.timestamp) {
          deliver(e, e.inbox.front(), e.inbox_arrival.front());
          e.inbox.pop_front();
          e.inbox_arrival.pop_front();
        }
        const auto rec = e.agent.step(s, e.labels[e.next]);
        auto bucket = static_cast<std::size_t>(s.timestamp / cfg_.simulation.bucket_seconds);
        bucket = std::min(bucket, e.report.bucket_counts.size() - 1);
        ++e.report.bucket_counts[bucket];
        ++e.report.inferences;
        if (*rec.correct) {
          e.report.bucket_accuracy[bucket] += 1.0;
          ++e.report.correct;
        }
        ++e.next;
      }
    }
  }

  void deliver(SimEdge& e, const proto::ModelUpdate& update, double at) {
    const auto outcome = e.agent.handle_update(update);
    if (outcome.status == UpdateStatus::Applied) {
      ++e.report.updates;
      e.report.update_times.push_back(at);
    }
    if (const auto* ack = std::get_if<proto::UpdateAck>(&outcome.reply)) {
      coordinator_->acknowledge(*ack);
    }
  }

  // Every edge closes its window at the current clock and uploads. Returns
  // the transfer time charged to the cloud.
  double collect_uploads(const std::optional<FilterConfig>& override_cfg) {
    const double now = clock_.now();
    advance_edges(now);
    double comm = 0.0;
    for (auto& e : edges_) {
      const auto closed = override_cfg ? e.agent.close_window(*override_cfg, now)
                                       : e.agent.close_window(now);
      if (!closed.batch) continue;
      const auto bytes = proto::encode(*closed.batch);
      bytes_up_ += bytes.size();
      samples_up_ += closed.batch->samples.size();
      const auto msg = proto::decode(bytes);
      const double t = static_cast<double>(bytes.size()) * cfg_.coordinator.costs.seconds_per_byte;
      clock_.advance(t);
      comm += t;
      coordinator_->ingest_batch(std::get<proto::SampleBatch>(msg));
    }
    return comm;
  }

  double dispatch(const proto::ModelUpdate& update) {
    const auto bytes = proto::encode(update);
    bytes_down_ += bytes.size();
    const double t = static_cast<double>(bytes.size()) * cfg_.coordinator.costs.seconds_per_byte;
    clock_.advance(t);
    for (auto& e : edges_) {
      if (e.spec.edge_id == update.edge_id) {
        e.inbox.push_back(std::get<proto::ModelUpdate>(proto::decode(bytes)));
        e.inbox_arrival.push_back(clock_.now());
      }
    }
    return t;
  }

  void record_cycle(CycleRecord rec, double start) {
    rec.start_time = start;
    cycles_.push_back(std::move(rec));
  }

  void run_one_time() {
    clock_.set(cfg_.baselines.one_time_seconds);
    const double start = clock_.now();
    const double comm = collect_uploads(cfg_.filter.with_keep_fraction(1.0));
    for (const auto& id : coordinator_->edge_ids()) {
      auto result = coordinator_->train_edge(id);
      result.record.communication_seconds = dispatch(*result.update);
      if (cycles_.empty()) result.record.communication_seconds += comm;
      record_cycle(std::move(result.record), start);
    }
  }

  void run_fixed_interval() {
    const auto cfg = cfg_.filter.with_keep_fraction(cfg_.baselines.fixed_keep_fraction);
    for (double due = cfg_.baselines.fixed_interval_seconds; due < horizon_;
         due += cfg_.baselines.fixed_interval_seconds) {
      // A cycle that overran its interval delays the next one.
      if (clock_.now() < due) clock_.set(due);
      if (clock_.now() >= horizon_) break;
      const double start = clock_.now();
      CycleRecord combined;
      combined.communication_seconds = collect_uploads(cfg);
      combined.selected = "*";
      for (const auto& id : coordinator_->edge_ids()) {
        auto result = coordinator_->train_edge(id, cfg_.baselines.fixed_epochs);
        combined.cycle_id = result.record.cycle_id;
        combined.label_seconds += result.record.label_seconds;
        combined.train_seconds += result.record.train_seconds;
        combined.profiling_seconds += result.record.profiling_seconds;
        combined.train_set_size += result.record.train_set_size;
        combined.epochs += result.record.epochs;
        combined.stop_reason = result.record.stop_reason;
        combined.urgencies = result.record.urgencies;
        combined.communication_seconds += dispatch(*result.update);
      }
      combined.end_time = clock_.now();
      record_cycle(std::move(combined), start);
    }
  }

  // Cycles start on a fixed tick grid: an idle cycle waits for the next
  // tick, a busy one starts the next cycle at the first tick after it ends.
  void run_edgesync() {
    const double tick = cfg_.simulation.idle_poll_seconds;
    while (clock_.now() < horizon_) {
      const double start = clock_.now();
      const double comm = collect_uploads(std::nullopt);
      auto result = coordinator_->run_cycle();
      if (!result.update) {
        ++idle_cycles_;
        clock_.set(next_tick(start + tick, tick));
        continue;
      }
      result.record.communication_seconds = comm + dispatch(*result.update);
      result.record.end_time = clock_.now();
      record_cycle(std::move(result.record), start);
      clock_.set(next_tick(clock_.now(), tick));
    }
  }

  static double next_tick(double t, double tick) {
    // Tolerate rounding so a time that is already on the grid stays there.
    return std::ceil(t / tick - 1e-9) * tick;
  }

  RunReport finish() {
    RunReport r;
    r.strategy = to_string(strategy_);
    r.experiment = cfg_.name;
    r.seed = seed_;
    r.horizon = horizon_;
    r.bucket_seconds = cfg_.simulation.bucket_seconds;
    for (auto& e : edges_) {
      for (std::size_t b = 0; b < e.report.bucket_counts.size(); ++b) {
        const auto n = e.report.bucket_counts[b];
        e.report.bucket_accuracy[b] = n == 0 ? 0.0 : e.report.bucket_accuracy[b] / static_cast<double>(n);
      }
      r.edges.push_back(std::move(e.report));
    }
    for (auto& c : cycles_) {
      if (c.end_time < c.start_time) c.end_time = c.start_time + c.total_seconds();
    }
    r.cycles = std::move(cycles_);
    r.idle_cycles = idle_cycles_;
    r.bytes_uploaded = bytes_up_;
    r.bytes_downloaded = bytes_down_;
    r.samples_uploaded = samples_up_;
    r.config_json = manifest_to_json(cfg_);
    detail::logger().info("event=run_done strategy={} seed={} accuracy={:.4f} updates={} cycles={}",
                          r.strategy, r.seed, r.accuracy(), r.updates(), r.cycles.size());
    return r;
  }

  ExperimentConfig cfg_;
  Strategy strategy_;
  std::uint64_t seed_;
  double horizon_;
  SimClock clock_;
  std::shared_ptr<StreamLabels> labels_;
  std::unique_ptr<Coordinator> coordinator_;
  std::vector<SimEdge> edges_;
  std::vector<CycleRecord> cycles_;
  std::size_t idle_cycles_ = 0;
  std::size_t bytes_up_ = 0;
  std::size_t bytes_down_ = 0;
  std::size_t samples_up_ = 0;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

SceneTemplate scene(double duration, double separation, double center_scale) {
  SceneTemplate s;
  s.duration = duration;
  s.separation = separation;
  s.center_scale = center_scale;
  return s;
}

}  // namespace

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::NoAdaptation: return "NoAdaptation";
    case Strategy::OneTimeAdaptation: return "OneTimeAdaptation";
    case Strategy::FixedInterval: return "FixedInterval";
    case Strategy::EdgeSync: return "EdgeSync";
  }
  return "Unknown";
}

Strategy parse_strategy(std::string_view name) {
  const auto n = lower(name);
  if (n == "noadaptation" || n == "none") return Strategy::NoAdaptation;
  if (n == "onetimeadaptation" || n == "onetime") return Strategy::OneTimeAdaptation;
  if (n == "fixedinterval" || n == "fixed") return Strategy::FixedInterval;
  if (n == "edgesync") return Strategy::EdgeSync;
  throw Error(Errc::Config, "unknown strategy '" + std::string(name) + "'");
}

double WorkloadTemplate::total_seconds() const {
  double t = 0.0;
  for (const auto& s : scenes) t += s.duration;
  return t;
}

double ExperimentConfig::horizon() const {
  double h = 0.0;
  for (const auto& w : workloads) h = std::max(h, w.total_seconds());
  return h;
}

void ExperimentConfig::validate() const {
  coordinator.validate();
  if (workloads.empty()) throw Error(Errc::Config, "experiment needs at least one workload");
  std::vector<EdgeId> ids;
  for (const auto& w : workloads) {
    if (w.scenes.empty()) throw Error(Errc::Config, "workload '" + w.edge_id + "' has no scenes");
    if (!(w.samples_per_second > 0.0)) throw Error(Errc::Config, "samples_per_second must be > 0");
    for (const auto& s : w.scenes) {
      if (!(s.duration > 0.0)) throw Error(Errc::Config, "scene duration must be > 0");
      if (!(s.noise_scale > 0.0)) throw Error(Errc::Config, "noise_scale must be > 0");
    }
    ids.push_back(w.edge_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(Errc::Config, "edge ids must be unique");
  }
  if (model.dims.class_count < 2 || model.dims.feature_dim == 0 || model.dims.hidden_dim == 0) {
    throw Error(Errc::Config, "model dimensions must be positive with >= 2 classes");
  }
  if (!(baselines.fixed_interval_seconds > 0.0)) throw Error(Errc::Config, "fixed interval must be > 0");
  if (baselines.fixed_epochs < 1) throw Error(Errc::Config, "fixed_epochs must be >= 1");
  if (!(baselines.fixed_keep_fraction > 0.0 && baselines.fixed_keep_fraction <= 1.0)) {
    throw Error(Errc::Config, "fixed_keep_fraction must be in (0,1]");
  }
  if (!(simulation.idle_poll_seconds > 0.0) || !(simulation.bucket_seconds > 0.0)) {
    throw Error(Errc::Config, "simulation periods must be > 0");
  }
  if (!(teacher_error_rate >= 0.0 && teacher_error_rate <= 1.0)) {
    throw Error(Errc::Config, "teacher error rate must be in [0,1]");
  }
}

ExperimentConfig default_experiment() {
  ExperimentConfig cfg;
  cfg.name = "default";
  // Desk-scale costs: a cycle's label and train time is comparable to the
  // scene length, so edges actually contend for the cloud.
  cfg.coordinator.costs.label_seconds_per_sample = 0.05;
  cfg.coordinator.costs.train_seconds_per_sample_epoch = 0.003;
  cfg.coordinator.costs.seconds_per_byte = 1e-5;
  cfg.coordinator.buffer_capacity = 100;
  for (int e = 0; e < 2; ++e) {
    WorkloadTemplate w;
    w.edge_id = "edge-" + std::to_string(e);
    w.seed = 101 + static_cast<std::uint64_t>(e);
    for (int s = 0; s < 4; ++s) w.scenes.push_back(scene(250.0, 6.0, 6.0));
    cfg.workloads.push_back(std::move(w));
  }
  return cfg;
}

ExperimentConfig drift_vs_stationary_experiment() {
  ExperimentConfig cfg = default_experiment();
  cfg.name = "drift-vs-stationary";
  cfg.workloads[1].scenes = {scene(1000.0, 6.0, 6.0)};
  return cfg;
}

ExperimentConfig replicate_edges(const ExperimentConfig& base, std::size_t count) {
  if (count == 0) throw Error(Errc::Config, "edge count must be >= 1");
  ExperimentConfig cfg = base;
  cfg.name = base.name + "-x" + std::to_string(count);
  cfg.workloads.clear();
  for (std::size_t i = 0; i < count; ++i) {
    WorkloadTemplate w = base.workloads.front();
    w.edge_id = "edge-" + std::to_string(i);
    cfg.workloads.push_back(std::move(w));
  }
  return cfg;
}

const WorkloadTemplate& find_workload(const ExperimentConfig& cfg, const EdgeId& edge_id) {
  for (const auto& w : cfg.workloads) {
    if (w.edge_id == edge_id) return w;
  }
  throw Error(Errc::UnknownEdge, "no workload for edge '" + edge_id + "'");
}

WorkloadSpec instantiate_workload(const WorkloadTemplate& tpl, const ModelConfig& model,
                                  std::uint64_t run_seed) {
  const auto& dims = model.dims;
  WorkloadSpec spec;
  spec.edge_id = tpl.edge_id;
  spec.feature_dim = dims.feature_dim;
  spec.samples_per_second = tpl.samples_per_second;
  spec.total_seconds = tpl.total_seconds();
  spec.seed = mix(run_seed, tpl.seed, kStreamSalt);
  double start = 0.0;
  for (std::size_t i = 0; i < tpl.scenes.size(); ++i) {
    const auto& st = tpl.scenes[i];
    SceneSpec s;
    s.class_means = st.class_means.empty()
                        ? random_class_means(dims.class_count, dims.feature_dim, st.separation,
                                             st.center_scale, mix(run_seed, tpl.seed, i))
                        : st.class_means;
    s.class_priors = st.class_priors.empty()
                         ? std::vector<double>(dims.class_count, 1.0 / static_cast<double>(dims.class_count))
                         : st.class_priors;
    s.noise_scale = st.noise_scale;
    s.start_time = start;
    s.duration = st.duration;
    start += st.duration;
    spec.scenes.push_back(std::move(s));
  }
  spec.validate();
  return spec;
}

StudentModel initial_student(const ExperimentConfig& cfg, const WorkloadSpec& workload,
                             std::uint64_t run_seed) {
  const std::uint64_t wseed = workload.seed;
  StudentModel model(make_initial_params(cfg.model.dims, cfg.model.frozen_seed),
                     mix(run_seed, wseed, kModelSalt), cfg.model.batch_size);
  if (cfg.pretrain.samples > 0 && cfg.pretrain.epochs > 0) {
    const auto samples = draw_scene_samples(workload.scenes.front(), workload.edge_id,
                                            cfg.pretrain.samples, mix(run_seed, wseed, kPretrainSalt));
    pretrain(model, samples, cfg.coordinator.trainer.hyperparams, cfg.pretrain.epochs);
  }
  return model;
}

StreamLabels::StreamLabels(std::size_t class_count, double error_rate, std::uint64_t seed)
    : teacher_(class_count, error_rate, seed) {}

void StreamLabels::add_stream(const EdgeId& edge_id, std::span<const Sample> stream) {
  auto& out = labels_[edge_id];
  out.clear();
  out.reserve(stream.size());
  for (const auto& s : stream) {
    if (s.seq != out.size()) throw Error(Errc::InvalidArgument, "stream seq must start at 0 and be dense");
    out.push_back(teacher_.label(s));
  }
}

std::uint32_t StreamLabels::label(const EdgeId& edge_id, const proto::UploadedSample& sample) const {
  auto it = labels_.find(edge_id);
  if (it == labels_.end()) throw Error(Errc::UnknownEdge, "no labels for edge '" + edge_id + "'");
  if (sample.seq >= it->second.size()) {
    throw Error(Errc::InvalidArgument, "seq " + std::to_string(sample.seq) + " beyond stream");
  }
  return it->second[sample.seq];
}

double RunReport::accuracy() const noexcept {
  std::size_t n = 0;
  std::size_t c = 0;
  for (const auto& e : edges) {
    n += e.inferences;
    c += e.correct;
  }
  return n == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(n);
}

std::size_t RunReport::updates() const noexcept {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.updates;
  return n;
}

double RunReport::mean_cycle_seconds() const noexcept {
  if (cycles.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : cycles) s += c.total_seconds();
  return s / static_cast<double>(cycles.size());
}

double RunReport::profiling_share() const noexcept {
  double total = 0.0;
  double profiling = 0.0;
  for (const auto& c : cycles) {
    total += c.total_seconds();
    profiling += c.profiling_seconds;
  }
  return total > 0.0 ? profiling / total : 0.0;
}

RunReport run_experiment(const ExperimentConfig& cfg, Strategy strategy, std::uint64_t seed) {
  return Simulation(cfg, strategy, seed).run();
}

std::vector<SweepRow> sweep_filter_fraction(const ExperimentConfig& cfg,
                                            std::span<const double> fractions,
                                            std::span<const std::uint64_t> seeds) {
  std::vector<SweepRow> rows;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw Error(Errc::Config, "fractions must lie in (0,1]");
    ExperimentConfig c = cfg;
    c.baselines.fixed_keep_fraction = f;
    for (auto seed : seeds) {
      const auto r = run_experiment(c, Strategy::FixedInterval, seed);
      rows.push_back(SweepRow{r.strategy, f, seed, r.accuracy(), r.updates(), r.bytes_uploaded});
    }
  }
  return rows;
}

std::vector<SweepRow> sweep_edge_count(const ExperimentConfig& cfg,
                                       std::span<const std::size_t> counts,
                                       std::span<const std::uint64_t> seeds) {
  std::vector<SweepRow> rows;
  for (auto count : counts) {
    const auto c = replicate_edges(cfg, count);
    for (auto strategy : {Strategy::FixedInterval, Strategy::EdgeSync}) {
      for (auto seed : seeds) {
        const auto r = run_experiment(c, strategy, seed);
        rows.push_back(SweepRow{r.strategy, static_cast<double>(count), seed, r.accuracy(),
                                r.updates(), r.bytes_uploaded});
      }
    }
  }
  return rows;
}

}  // namespace edgesync
