// JSON and CSV formats for manifests, run reports, sweeps and profiles.
// Key order is fixed and doubles print in shortest round-trip form, so the
// same report always serialises to the same bytes.

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "edgesync/error.hpp"
#include "edgesync/harness.hpp"

namespace edgesync {
namespace {

using Json = nlohmann::ordered_json;

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, std::string("field '") + key + "': " + e.what());
  }
}

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw Error(Errc::Config, std::string("'") + key + "' must be an object");
  return j.at(key);
}

Json hyperparams_json(const HyperParams& h) {
  return Json{{"learning_rate", h.learning_rate()},
              {"momentum", h.momentum()},
              {"weight_decay", h.weight_decay()}};
}

HyperParams hyperparams_from(const Json& j, const HyperParams& fallback) {
  try {
    return HyperParams(get_or(j, "learning_rate", fallback.learning_rate()),
                       get_or(j, "momentum", fallback.momentum()),
                       get_or(j, "weight_decay", fallback.weight_decay()));
  } catch (const Error& e) {
    throw Error(Errc::Config, e.what());
  }
}

const char* direction_name(TimelinessDirection d) {
  return d == TimelinessDirection::FavorRecent ? "favor_recent" : "favor_older";
}

TimelinessDirection parse_direction(const std::string& s) {
  if (s == "favor_recent") return TimelinessDirection::FavorRecent;
  if (s == "favor_older") return TimelinessDirection::FavorOlder;
  throw Error(Errc::Config, "timeliness direction must be favor_recent or favor_older");
}

Json scene_json(const SceneTemplate& s) {
  Json j{{"duration", s.duration}, {"noise_scale", s.noise_scale}};
  if (s.class_means.empty()) {
    j["separation"] = s.separation;
    j["center_scale"] = s.center_scale;
  } else {
    j["class_means"] = s.class_means;
  }
  if (!s.class_priors.empty()) j["class_priors"] = s.class_priors;
  return j;
}

SceneTemplate scene_from(const Json& j) {
  SceneTemplate s;
  s.duration = get_or(j, "duration", s.duration);
  s.noise_scale = get_or(j, "noise_scale", s.noise_scale);
  s.separation = get_or(j, "separation", s.separation);
  s.center_scale = get_or(j, "center_scale", s.center_scale);
  s.class_priors = get_or(j, "class_priors", s.class_priors);
  s.class_means = get_or(j, "class_means", s.class_means);
  return s;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json cycle_json(const CycleRecord& c) {
  Json urg = Json::object();
  for (const auto& [id, d] : c.urgencies) urg[id] = d;
  return Json{{"cycle_id", c.cycle_id},
              {"start_time", c.start_time},
              {"end_time", c.end_time},
              {"selected", c.selected},
              {"urgencies", urg},
              {"train_set_size", c.train_set_size},
              {"epochs", c.epochs},
              {"best_epoch", c.best_epoch},
              {"best_eval", c.best_eval},
              {"stop_reason", c.stop_reason},
              {"version", c.version},
              {"label_seconds", c.label_seconds},
              {"train_seconds", c.train_seconds},
              {"profiling_seconds", c.profiling_seconds},
              {"communication_seconds", c.communication_seconds},
              {"total_seconds", c.total_seconds()}};
}

Json trace_json(const std::vector<bho::TraceEntry>& trace) {
  Json out = Json::array();
  for (const auto& t : trace) {
    out.push_back(Json{{"point", t.point},
                       {"value", t.value},
                       {"failed", t.failed},
                       {"acquisition", t.acquisition}});
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string manifest_to_json(const ExperimentConfig& cfg) {
  const auto& c = cfg.coordinator;
  Json workloads = Json::array();
  for (const auto& w : cfg.workloads) {
    Json scenes = Json::array();
    for (const auto& s : w.scenes) scenes.push_back(scene_json(s));
    workloads.push_back(Json{{"edge_id", w.edge_id},
                             {"seed", w.seed},
                             {"samples_per_second", w.samples_per_second},
                             {"scenes", scenes}});
  }
  Json j{
      {"name", cfg.name},
      {"model",
       {{"feature_dim", cfg.model.dims.feature_dim},
        {"hidden_dim", cfg.model.dims.hidden_dim},
        {"class_count", cfg.model.dims.class_count},
        {"frozen_seed", cfg.model.frozen_seed},
        {"batch_size", cfg.model.batch_size}}},
      {"filter",
       {{"alpha", cfg.filter.alpha()},
        {"beta", cfg.filter.beta()},
        {"keep_fraction", cfg.filter.keep_fraction()},
        {"window_seconds", cfg.filter.window_seconds()},
        {"direction", direction_name(cfg.filter.direction())}}},
      {"urgency",
       {{"capacity", c.urgency.capacity()},
        {"batch_count", c.urgency.batch_count()},
        {"decay_constant", c.urgency.decay_constant()},
        {"min_urgency", c.min_urgency},
        {"accuracy_floor", c.accuracy_floor}}},
      {"trainer",
       {{"patience", c.trainer.patience},
        {"max_time", c.trainer.max_time},
        {"eval_fraction", c.trainer.eval_fraction},
        {"split_seed", c.trainer.split_seed},
        {"hyperparams", hyperparams_json(c.trainer.hyperparams)}}},
      {"coordinator", {{"buffer_capacity", c.buffer_capacity}}},
      {"costs",
       {{"label_seconds_per_sample", c.costs.label_seconds_per_sample},
        {"train_seconds_per_sample_epoch", c.costs.train_seconds_per_sample_epoch},
        {"seconds_per_byte", c.costs.seconds_per_byte},
        {"profiling_seconds_per_cycle", c.costs.profiling_seconds_per_cycle}}},
      {"teacher", {{"error_rate", cfg.teacher_error_rate}, {"seed", cfg.teacher_seed}}},
      {"pretrain", {{"samples", cfg.pretrain.samples}, {"epochs", cfg.pretrain.epochs}}},
      {"baselines",
       {{"fixed_interval_seconds", cfg.baselines.fixed_interval_seconds},
        {"fixed_epochs", cfg.baselines.fixed_epochs},
        {"one_time_seconds", cfg.baselines.one_time_seconds},
        {"fixed_keep_fraction", cfg.baselines.fixed_keep_fraction}}},
      {"simulation",
       {{"idle_poll_seconds", cfg.simulation.idle_poll_seconds},
        {"bucket_seconds", cfg.simulation.bucket_seconds}}},
      {"workloads", workloads},
  };
  return dump(j);
}

ExperimentConfig parse_manifest(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::Config, "manifest must be a JSON object");

  ExperimentConfig cfg;
  cfg.name = get_or(j, "name", cfg.name);

  const auto& m = section(j, "model");
  cfg.model.dims.feature_dim = get_or(m, "feature_dim", cfg.model.dims.feature_dim);
  cfg.model.dims.hidden_dim = get_or(m, "hidden_dim", cfg.model.dims.hidden_dim);
  cfg.model.dims.class_count = get_or(m, "class_count", cfg.model.dims.class_count);
  cfg.model.frozen_seed = get_or(m, "frozen_seed", cfg.model.frozen_seed);
  cfg.model.batch_size = get_or(m, "batch_size", cfg.model.batch_size);

  try {
    const auto& f = section(j, "filter");
    cfg.filter = FilterConfig(get_or(f, "alpha", cfg.filter.alpha()), get_or(f, "beta", cfg.filter.beta()),
                              get_or(f, "keep_fraction", cfg.filter.keep_fraction()),
                              get_or(f, "window_seconds", cfg.filter.window_seconds()),
                              parse_direction(get_or<std::string>(f, "direction", "favor_recent")));

    auto& c = cfg.coordinator;
    const auto& u = section(j, "urgency");
    c.urgency = UrgencyConfig(get_or(u, "capacity", c.urgency.capacity()),
                              get_or(u, "batch_count", c.urgency.batch_count()),
                              get_or(u, "decay_constant", 0.0));
    c.min_urgency = get_or(u, "min_urgency", c.min_urgency);
    c.accuracy_floor = get_or(u, "accuracy_floor", c.accuracy_floor);

    const auto& t = section(j, "trainer");
    c.trainer.patience = get_or(t, "patience", c.trainer.patience);
    c.trainer.max_time = get_or(t, "max_time", c.trainer.max_time);
    c.trainer.eval_fraction = get_or(t, "eval_fraction", c.trainer.eval_fraction);
    c.trainer.split_seed = get_or(t, "split_seed", c.trainer.split_seed);
    c.trainer.hyperparams = hyperparams_from(section(t, "hyperparams"), c.trainer.hyperparams);
    c.buffer_capacity = get_or(section(j, "coordinator"), "buffer_capacity", c.buffer_capacity);
    c.batch_size = cfg.model.batch_size;

    const auto& k = section(j, "costs");
    c.costs.label_seconds_per_sample = get_or(k, "label_seconds_per_sample", c.costs.label_seconds_per_sample);
    c.costs.train_seconds_per_sample_epoch =
        get_or(k, "train_seconds_per_sample_epoch", c.costs.train_seconds_per_sample_epoch);
    c.costs.seconds_per_byte = get_or(k, "seconds_per_byte", c.costs.seconds_per_byte);
    c.costs.profiling_seconds_per_cycle =
        get_or(k, "profiling_seconds_per_cycle", c.costs.profiling_seconds_per_cycle);
  } catch (const Error& e) {
    if (e.code() == Errc::Config) throw;
    throw Error(Errc::Config, e.what());
  }

  const auto& te = section(j, "teacher");
  cfg.teacher_error_rate = get_or(te, "error_rate", cfg.teacher_error_rate);
  cfg.teacher_seed = get_or(te, "seed", cfg.teacher_seed);

  const auto& p = section(j, "pretrain");
  cfg.pretrain.samples = get_or(p, "samples", cfg.pretrain.samples);
  cfg.pretrain.epochs = get_or(p, "epochs", cfg.pretrain.epochs);

  const auto& b = section(j, "baselines");
  cfg.baselines.fixed_interval_seconds = get_or(b, "fixed_interval_seconds", cfg.baselines.fixed_interval_seconds);
  cfg.baselines.fixed_epochs = get_or(b, "fixed_epochs", cfg.baselines.fixed_epochs);
  cfg.baselines.one_time_seconds = get_or(b, "one_time_seconds", cfg.baselines.one_time_seconds);
  cfg.baselines.fixed_keep_fraction = get_or(b, "fixed_keep_fraction", cfg.baselines.fixed_keep_fraction);

  const auto& s = section(j, "simulation");
  cfg.simulation.idle_poll_seconds = get_or(s, "idle_poll_seconds", cfg.simulation.idle_poll_seconds);
  cfg.simulation.bucket_seconds = get_or(s, "bucket_seconds", cfg.simulation.bucket_seconds);

  if (!j.contains("workloads") || !j.at("workloads").is_array()) {
    throw Error(Errc::Config, "manifest needs a 'workloads' array");
  }
  for (const auto& wj : j.at("workloads")) {
    WorkloadTemplate w;
    w.edge_id = get_or(wj, "edge_id", w.edge_id);
    w.seed = get_or(wj, "seed", w.seed);
    w.samples_per_second = get_or(wj, "samples_per_second", w.samples_per_second);
    if (!wj.contains("scenes") || !wj.at("scenes").is_array()) {
      throw Error(Errc::Config, "workload '" + w.edge_id + "' needs a 'scenes' array");
    }
    for (const auto& sj : wj.at("scenes")) w.scenes.push_back(scene_from(sj));
    cfg.workloads.push_back(std::move(w));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open manifest " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

std::string report_to_json(const RunReport& r) {
  Json edges = Json::array();
  for (const auto& e : r.edges) {
    edges.push_back(Json{{"edge_id", e.edge_id},
                         {"inferences", e.inferences},
                         {"correct", e.correct},
                         {"accuracy", e.accuracy()},
                         {"updates", e.updates},
                         {"update_times", e.update_times},
                         {"scene_changes", e.scene_changes},
                         {"bucket_accuracy", e.bucket_accuracy},
                         {"bucket_counts", e.bucket_counts}});
  }
  Json cycles = Json::array();
  for (const auto& c : r.cycles) cycles.push_back(cycle_json(c));
  Json j{{"strategy", r.strategy},
         {"experiment", r.experiment},
         {"seed", r.seed},
         {"horizon", r.horizon},
         {"bucket_seconds", r.bucket_seconds},
         {"accuracy", r.accuracy()},
         {"updates", r.updates()},
         {"training_cycles", r.cycles.size()},
         {"idle_cycles", r.idle_cycles},
         {"mean_cycle_seconds", r.mean_cycle_seconds()},
         {"profiling_share", r.profiling_share()},
         {"bytes_uploaded", r.bytes_uploaded},
         {"bytes_downloaded", r.bytes_downloaded},
         {"samples_uploaded", r.samples_uploaded},
         {"edges", edges},
         {"cycles", cycles},
         {"config", Json::parse(r.config_json)}};
  return dump(j);
}

std::string report_series_csv(const RunReport& r) {
  std::ostringstream os;
  os << "edge_id,bucket_start,accuracy,count\n";
  for (const auto& e : r.edges) {
    for (std::size_t b = 0; b < e.bucket_accuracy.size(); ++b) {
      os << e.edge_id << ',' << fmt_double(static_cast<double>(b) * r.bucket_seconds) << ','
         << fmt_double(e.bucket_accuracy[b]) << ',' << e.bucket_counts[b] << '\n';
    }
  }
  return os.str();
}

std::string report_cycles_csv(const RunReport& r) {
  std::ostringstream os;
  os << "cycle_id,start_time,end_time,selected,epochs,stop_reason,label_seconds,train_seconds,"
        "profiling_seconds,communication_seconds,total_seconds\n";
  for (const auto& c : r.cycles) {
    os << c.cycle_id << ',' << fmt_double(c.start_time) << ',' << fmt_double(c.end_time) << ','
       << c.selected << ',' << c.epochs << ',' << c.stop_reason << ','
       << fmt_double(c.label_seconds) << ',' << fmt_double(c.train_seconds) << ','
       << fmt_double(c.profiling_seconds) << ',' << fmt_double(c.communication_seconds) << ','
       << fmt_double(c.total_seconds()) << '\n';
  }
  return os.str();
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << "strategy,parameter,seed,accuracy,updates,bytes_uploaded\n";
  for (const auto& row : rows) {
    os << row.strategy << ',' << fmt_double(row.parameter) << ',' << row.seed << ','
       << fmt_double(row.accuracy) << ',' << row.updates << ',' << row.bytes_uploaded << '\n';
  }
  return os.str();
}

std::string profile_to_json(const Profile& p) {
  Json workloads = Json::array();
  for (const auto& w : p.workloads) {
    workloads.push_back(Json{{"edge_id", w.edge_id},
                             {"best_point", w.result.best_point},
                             {"best_value", w.result.best_value},
                             {"trace", trace_json(w.result.trace)}});
  }
  Json steps = Json::array();
  for (const auto& s : p.refine.steps) {
    steps.push_back(Json{{"workload", s.workload},
                         {"segment_start", s.segment_start},
                         {"base_accuracy", s.base_accuracy},
                         {"accepted_accuracy", s.accepted_accuracy},
                         {"best_seen", s.best_seen},
                         {"accepted", s.accepted},
                         {"point", s.point}});
  }
  Json j{{"seed", p.seed},
         {"h0", hyperparams_json(p.h0)},
         {"aggregated", hyperparams_json(p.aggregated)},
         {"workloads", workloads},
         {"refine_steps", steps}};
  return dump(j);
}

HyperParams parse_profile_h0(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, std::string("profile is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("h0") || !j.at("h0").is_object()) {
    throw Error(Errc::Config, "profile needs an 'h0' object");
  }
  const auto& h = j.at("h0");
  for (const char* key : {"learning_rate", "momentum", "weight_decay"}) {
    if (!h.contains(key)) throw Error(Errc::Config, std::string("h0 is missing '") + key + "'");
  }
  return hyperparams_from(h, HyperParams(1.0, 0.0, 0.0));
}

HyperParams load_profile_h0(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open profile " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_profile_h0(ss.str());
}

}  // namespace edgesync
