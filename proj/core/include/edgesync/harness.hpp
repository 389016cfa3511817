#pragma once

// Experiment driver: deterministic single-threaded simulation of several
// edges and one coordinator under a simulated clock, the baseline
// strategies, parameter sweeps and the offline hyperparameter profiler.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgesync/bho.hpp"
#include "edgesync/coordinator.hpp"
#include "edgesync/modelkit.hpp"

namespace edgesync {

enum class Strategy { NoAdaptation, OneTimeAdaptation, FixedInterval, EdgeSync };

const char* to_string(Strategy s) noexcept;
/// Accepts the names printed by to_string, case-insensitively, plus the
/// short forms none / onetime / fixed / edgesync. Throws Config.
Strategy parse_strategy(std::string_view name);

struct SceneTemplate {
  double duration = 250.0;
  double noise_scale = 1.0;
  /// Used when class_means is empty: means are drawn per run seed.
  double separation = 6.0;
  double center_scale = 6.0;
  std::vector<double> class_priors;              // empty: uniform
  std::vector<std::vector<double>> class_means;  // empty: drawn
};

struct WorkloadTemplate {
  EdgeId edge_id = "edge-0";
  std::uint64_t seed = 1;  // mixed with the run seed
  double samples_per_second = 2.0;
  std::vector<SceneTemplate> scenes;

  double total_seconds() const;
};

struct ModelConfig {
  ModelDims dims;
  std::uint64_t frozen_seed = 7;
  std::size_t batch_size = 32;
};

struct PretrainConfig {
  std::size_t samples = 300;
  int epochs = 30;
};

struct BaselineConfig {
  double fixed_interval_seconds = 100.0;
  int fixed_epochs = 30;
  double one_time_seconds = 100.0;
  /// keep fraction used by FixedInterval; 1.0 means no filtering.
  double fixed_keep_fraction = 1.0;
};

struct SimulationConfig {
  /// Clock advance when a cycle finds nothing to train.
  double idle_poll_seconds = 5.0;
  double bucket_seconds = 25.0;
};

struct ExperimentConfig {
  std::string name = "default";
  ModelConfig model;
  FilterConfig filter;
  CoordinatorConfig coordinator;
  double teacher_error_rate = 0.0;
  std::uint64_t teacher_seed = 0;
  PretrainConfig pretrain;
  BaselineConfig baselines;
  SimulationConfig simulation;
  std::vector<WorkloadTemplate> workloads;

  /// Longest workload duration.
  double horizon() const;
  void validate() const;
};

/// Two edges, 1,000 s at 2 samples/s each (2,000 samples), four 250 s
/// scenes (three scene changes) per edge.
ExperimentConfig default_experiment();

/// One edge that changes scene every 250 s and one that never does.
ExperimentConfig drift_vs_stationary_experiment();

/// `count` edges replaying the same workload as the first one in `base`.
ExperimentConfig replicate_edges(const ExperimentConfig& base, std::size_t count);

ExperimentConfig load_manifest(const std::string& path);
ExperimentConfig parse_manifest(const std::string& text);
std::string manifest_to_json(const ExperimentConfig& cfg);

/// The workload template driving `edge_id`. Throws UnknownEdge.
const WorkloadTemplate& find_workload(const ExperimentConfig& cfg, const EdgeId& edge_id);

/// Concrete workload for a run seed: scene means and stream draws depend on
/// (run_seed, workload seed) only, so every strategy sees the same stream.
WorkloadSpec instantiate_workload(const WorkloadTemplate& tpl, const ModelConfig& model,
                                  std::uint64_t run_seed);

/// Initial student for an edge: shared frozen projection, head pretrained
/// on the workload's first scene with independent draws.
StudentModel initial_student(const ExperimentConfig& cfg, const WorkloadSpec& workload,
                             std::uint64_t run_seed);

/// Teacher labels by (edge, seq), backed by the generated streams.
class StreamLabels final : public LabelSource {
 public:
  StreamLabels(std::size_t class_count, double error_rate, std::uint64_t seed);

  void add_stream(const EdgeId& edge_id, std::span<const Sample> stream);
  std::uint32_t label(const EdgeId& edge_id, const proto::UploadedSample& sample) const override;
  std::uint32_t label(const Sample& sample) const { return teacher_.label(sample); }

 private:
  Teacher teacher_;
  std::map<EdgeId, std::vector<std::uint32_t>> labels_;
};

struct EdgeReport {
  EdgeId edge_id;
  std::size_t inferences = 0;
  std::size_t correct = 0;
  std::size_t updates = 0;
  std::vector<double> update_times;
  std::vector<double> scene_changes;
  /// Mean accuracy per bucket of SimulationConfig::bucket_seconds.
  std::vector<double> bucket_accuracy;
  std::vector<std::size_t> bucket_counts;

  double accuracy() const noexcept {
    return inferences == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(inferences);
  }
};

struct RunReport {
  std::string strategy;
  std::string experiment;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  double bucket_seconds = 0.0;
  std::vector<EdgeReport> edges;
  std::vector<CycleRecord> cycles;  // training cycles only
  std::size_t idle_cycles = 0;
  std::size_t bytes_uploaded = 0;
  std::size_t bytes_downloaded = 0;
  std::size_t samples_uploaded = 0;
  std::string config_json;

  /// correct / total over every inference of every edge.
  double accuracy() const noexcept;
  std::size_t updates() const noexcept;
  double mean_cycle_seconds() const noexcept;
  double profiling_share() const noexcept;
};

RunReport run_experiment(const ExperimentConfig& cfg, Strategy strategy, std::uint64_t seed);

std::string report_to_json(const RunReport& report);
/// One row per (edge, bucket): edge_id,bucket_start,accuracy,count
std::string report_series_csv(const RunReport& report);
/// One row per training cycle with its time decomposition.
std::string report_cycles_csv(const RunReport& report);

struct SweepRow {
  std::string strategy;
  double parameter = 0.0;  // keep fraction or edge count
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  std::size_t updates = 0;
  std::size_t bytes_uploaded = 0;
};

/// FixedInterval with the filter at each fraction. |fractions| x |seeds| rows.
std::vector<SweepRow> sweep_filter_fraction(const ExperimentConfig& cfg,
                                            std::span<const double> fractions,
                                            std::span<const std::uint64_t> seeds);

/// FixedInterval and EdgeSync for each edge count (replicated workloads).
std::vector<SweepRow> sweep_edge_count(const ExperimentConfig& cfg,
                                       std::span<const std::size_t> counts,
                                       std::span<const std::uint64_t> seeds);

std::string sweep_to_csv(std::span<const SweepRow> rows);

struct ProfileConfig {
  bho::BhoConfig bho;
  bho::RefineConfig refine;
  bho::SearchSpace space;
  /// Segments per workload used to score one hyperparameter setting.
  std::size_t segments = 3;
  std::size_t segment_length = 200;
  /// Epoch cap for one scored training session.
  int max_epochs = 30;
  bool raw_mean = false;
};

struct WorkloadProfile {
  EdgeId edge_id;
  bho::BhoResult result;
};

struct Profile {
  HyperParams h0{0.05, 0.9, 1e-4};
  /// Mean of the per-workload optima before refinement.
  HyperParams aggregated{0.05, 0.9, 1e-4};
  std::vector<WorkloadProfile> workloads;
  bho::RefineResult refine{HyperParams{0.05, 0.9, 1e-4}, {}};
  std::uint64_t seed = 0;
};

/// Scores hyperparameters on labelled segments the way the coordinator
/// trains: early stopping from the pretrained head, capped at max_epochs.
double score_hyperparams(const ExperimentConfig& cfg, const StudentModel& start,
                         const HyperParams& h, std::span<const LabeledSample> segment,
                         int max_epochs);

Profile profile_offline(const ExperimentConfig& cfg, const ProfileConfig& pcfg, std::uint64_t seed);

std::string profile_to_json(const Profile& profile);
/// Reads h0 from a profile file (only the "h0" object is required).
HyperParams load_profile_h0(const std::string& path);
HyperParams parse_profile_h0(const std::string& text);

}  // namespace edgesync
