// harness: run simulations, sweeps and the offline profiler.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "edgesync/error.hpp"
#include "edgesync/harness.hpp"
#include "edgesync/logging.hpp"

namespace fs = std::filesystem;
using namespace edgesync;

namespace {

ExperimentConfig preset(const std::string& name) {
  if (name == "default") return default_experiment();
  if (name == "drift-vs-stationary") return drift_vs_stationary_experiment();
  throw Error(Errc::Config, "unknown preset '" + name + "' (default, drift-vs-stationary)");
}

ExperimentConfig load(const std::string& manifest, const std::string& preset_name) {
  return manifest.empty() ? preset(preset_name) : load_manifest(manifest);
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file(out, text);
  }
}

// Accuracy-vs-time rows from a saved report: time,edge_id,accuracy
std::string plot_series(const std::string& report_path) {
  std::ifstream in(report_path);
  if (!in) throw Error(Errc::Io, "cannot open report " + report_path);
  const auto j = nlohmann::json::parse(in);
  const double width = j.at("bucket_seconds").get<double>();
  std::ostringstream os;
  os << "time,edge_id,accuracy\n";
  for (const auto& e : j.at("edges")) {
    const auto& acc = e.at("bucket_accuracy");
    const auto& counts = e.at("bucket_counts");
    for (std::size_t b = 0; b < acc.size(); ++b) {
      if (counts[b].get<std::size_t>() == 0) continue;
      os << (static_cast<double>(b) + 0.5) * width << ',' << e.at("edge_id").get<std::string>()
         << ',' << acc[b].get<double>() << '\n';
    }
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EdgeSync experiment harness"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level;
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off (default: $EDGESYNC_LOG_LEVEL or warn)");

  std::string manifest;
  std::string preset_name = "default";
  std::string out;
  std::uint64_t seed = 1;
  std::string strategy = "edgesync";

  auto* run = app.add_subcommand("run", "Run one strategy and write report.json, series.csv, cycles.csv");
  run->add_option("--strategy", strategy, "none|onetime|fixed|edgesync")->required();
  run->add_option("--manifest", manifest, "Experiment manifest (JSON)");
  run->add_option("--preset", preset_name, "Built-in experiment when no manifest is given");
  run->add_option("--seed", seed, "Run seed");
  run->add_option("--out", out, "Output directory")->required();

  std::vector<double> fractions{0.2, 0.3, 0.5, 0.7, 0.9, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double interval = 0.0;
  auto* sweep_filter = app.add_subcommand("sweep-filter", "FixedInterval with the filter at several keep fractions");
  sweep_filter->add_option("--manifest", manifest, "Experiment manifest (JSON)");
  sweep_filter->add_option("--preset", preset_name, "Built-in experiment when no manifest is given");
  sweep_filter->add_option("--fractions", fractions, "Keep fractions in (0,1]")->delimiter(',');
  sweep_filter->add_option("--seeds", seeds, "Run seeds")->delimiter(',');
  sweep_filter->add_option("--interval", interval, "Update interval in seconds (default: manifest)");
  sweep_filter->add_option("--out", out, "CSV output file (default stdout)");

  std::vector<std::size_t> counts{1, 2, 4, 7};
  auto* sweep_edges = app.add_subcommand("sweep-edges", "FixedInterval and EdgeSync over several edge counts");
  sweep_edges->add_option("--manifest", manifest, "Experiment manifest (JSON)");
  sweep_edges->add_option("--preset", preset_name, "Built-in experiment when no manifest is given");
  sweep_edges->add_option("--counts", counts, "Edge counts")->delimiter(',');
  sweep_edges->add_option("--seeds", seeds, "Run seeds")->delimiter(',');
  sweep_edges->add_option("--out", out, "CSV output file (default stdout)");

  ProfileConfig pcfg;
  auto* profile = app.add_subcommand("profile", "Offline hyperparameter profiling; writes the h0 profile");
  profile->add_option("--manifest", manifest, "Experiment manifest (JSON)");
  profile->add_option("--preset", preset_name, "Built-in experiment when no manifest is given");
  profile->add_option("--seed", seed, "Profiling seed");
  profile->add_option("--evaluations", pcfg.bho.max_evaluations, "Objective evaluations per workload");
  profile->add_option("--segments", pcfg.segments, "Scored segments per workload");
  profile->add_option("--segment-length", pcfg.segment_length, "Samples per segment");
  profile->add_flag("--raw-mean", pcfg.raw_mean, "Average optima in raw rather than normalized space");
  profile->add_option("--out", out, "Profile output file (default stdout)");

  std::string report;
  auto* plot = app.add_subcommand("plot", "Accuracy-vs-time series from a report.json (CSV values only)");
  plot->add_option("--report", report, "report.json written by run")->required();
  plot->add_option("--out", out, "CSV output file (default stdout)");

  auto* show = app.add_subcommand("manifest", "Print a built-in experiment manifest");
  show->add_option("--preset", preset_name, "default | drift-vs-stationary");
  show->add_option("--out", out, "Output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    configure_logging(log_level, "info");
    if (*run) {
      const auto cfg = load(manifest, preset_name);
      const auto r = run_experiment(cfg, parse_strategy(strategy), seed);
      const fs::path dir(out);
      write_file(dir / "report.json", report_to_json(r));
      write_file(dir / "series.csv", report_series_csv(r));
      write_file(dir / "cycles.csv", report_cycles_csv(r));
      std::cout << "strategy=" << r.strategy << " seed=" << r.seed << " accuracy=" << r.accuracy()
                << " updates=" << r.updates() << " cycles=" << r.cycles.size()
                << " bytes_up=" << r.bytes_uploaded << " bytes_down=" << r.bytes_downloaded << '\n';
    } else if (*sweep_filter) {
      auto cfg = load(manifest, preset_name);
      if (interval > 0.0) cfg.baselines.fixed_interval_seconds = interval;
      emit(out, sweep_to_csv(sweep_filter_fraction(cfg, fractions, seeds)));
    } else if (*sweep_edges) {
      emit(out, sweep_to_csv(sweep_edge_count(load(manifest, preset_name), counts, seeds)));
    } else if (*profile) {
      emit(out, profile_to_json(profile_offline(load(manifest, preset_name), pcfg, seed)));
    } else if (*plot) {
      emit(out, plot_series(report));
    } else if (*show) {
      emit(out, manifest_to_json(preset(preset_name)));
    }
  } catch (const std::exception& e) {
    std::cerr << "harness: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
