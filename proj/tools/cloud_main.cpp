// cloud: the coordinator service. Edges connect over TCP, upload filtered
// windows on request and receive retrained heads.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "edgesync/clock.hpp"
#include "edgesync/cloud_server.hpp"
#include "edgesync/error.hpp"
#include "edgesync/harness.hpp"
#include "edgesync/logging.hpp"

using namespace edgesync;

namespace {

volatile std::sig_atomic_t g_stop = 0;

extern "C" void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EdgeSync cloud coordinator"};
  std::string bind = "127.0.0.1:7400";
  std::string profile;
  std::string config;
  std::string metrics_path;
  std::string log_level;
  std::uint64_t seed = 1;
  double duration = 0.0;
  std::size_t expect_edges = 0;
  CloudServerConfig scfg;
  app.add_option("--bind", bind, "Listen address host:port");
  app.add_option("--profile", profile, "Offline profile file; its h0 replaces the manifest hyperparameters");
  app.add_option("--config", config, "Experiment manifest (coordinator settings, models, workloads)")->required();
  app.add_option("--seed", seed, "Run seed; must match the edges'");
  app.add_option("--cycle-period", scfg.cycle_period_seconds, "Seconds between cycle starts");
  app.add_option("--batch-wait", scfg.batch_wait_seconds, "Seconds a cycle waits for requested batches");
  app.add_option("--duration", duration, "Stop after this many seconds (0 = until SIGINT/SIGTERM)");
  app.add_option("--expect-edges", expect_edges,
                 "With --duration 0, stop once this many edges have registered and all disconnected");
  app.add_option("--metrics", metrics_path, "Write final metrics JSON here (default: stdout)");
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
  CLI11_PARSE(app, argc, argv);

  try {
    configure_logging(log_level, "info");
    const auto cfg = load_manifest(config);
    CoordinatorConfig ccfg = cfg.coordinator;
    if (!profile.empty()) ccfg.trainer.hyperparams = load_profile_h0(profile);

    auto labels = std::make_shared<StreamLabels>(cfg.model.dims.class_count, cfg.teacher_error_rate,
                                                 cfg.teacher_seed);
    for (const auto& tpl : cfg.workloads) {
      const auto spec = instantiate_workload(tpl, cfg.model, seed);
      labels->add_stream(spec.edge_id, generate_stream(spec));
    }
    // Live costs are real; the simulated cost model is not charged.
    SteadyClock clock;
    Coordinator coordinator(ccfg, clock, labels);
    // The cloud reconstructs each edge's starting model from the shared
    // manifest; Register's checksum confirms both sides agree.
    const ModelFactory factory = [&cfg, seed](const proto::Register& reg) {
      return initial_student(cfg, instantiate_workload(find_workload(cfg, reg.edge_id), cfg.model, seed), seed);
    };

    const auto [host, port] = split_address(bind);
    TcpListener listener(host, port);
    CloudServer server(coordinator, factory, scfg);
    server.listen(listener);
    server.start();
    std::cerr << "cloud: listening on " << host << ':' << listener.port() << '\n';

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const auto start = std::chrono::steady_clock::now();
    bool seen_all = false;
    while (g_stop == 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (duration > 0.0 && elapsed >= duration) break;
      if (expect_edges > 0) {
        const auto n = server.registered_edges();
        if (n >= expect_edges) seen_all = true;
        if (seen_all && n == 0) break;
      }
    }
    server.stop();

    const auto text = metrics_to_json(server.metrics());
    if (metrics_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(metrics_path);
      if (!out) throw Error(Errc::Io, "cannot write " + metrics_path);
      out << text;
    }
  } catch (const std::exception& e) {
    std::cerr << "cloud: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
