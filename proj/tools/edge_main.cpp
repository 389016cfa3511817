// edge: replays one manifest workload through the student and talks to a
// running cloud coordinator over TCP.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "edgesync/edge_runner.hpp"
#include "edgesync/error.hpp"
#include "edgesync/harness.hpp"
#include "edgesync/logging.hpp"

using namespace edgesync;

namespace {

EdgeRunner* g_runner = nullptr;

extern "C" void on_signal(int) {
  if (g_runner != nullptr) g_runner->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EdgeSync edge agent"};
  std::string config;
  std::string connect;
  std::string edge_id;
  std::string log_level;
  std::uint64_t seed = 1;
  EdgeRunnerConfig rcfg;
  rcfg.speed = 1.0;
  rcfg.linger_seconds = 2.0;
  app.add_option("--config", config, "Experiment manifest (filter, model, workloads)")->required();
  app.add_option("--connect", connect, "Coordinator address host:port")->required();
  app.add_option("--edge-id", edge_id, "Which manifest workload this edge replays")->required();
  app.add_option("--seed", seed, "Run seed; must match the cloud's");
  app.add_option("--speed", rcfg.speed, "Stream seconds per wall second (0 = unpaced)");
  app.add_option("--window-seconds", rcfg.local_window_seconds,
                 "Also close windows locally every N stream seconds (0 = on request only)");
  app.add_option("--linger", rcfg.linger_seconds, "Seconds to keep serving after the stream ends");
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
  CLI11_PARSE(app, argc, argv);

  try {
    configure_logging(log_level, "info");
    const auto cfg = load_manifest(config);
    const auto spec = instantiate_workload(find_workload(cfg, edge_id), cfg.model, seed);
    const auto stream = generate_stream(spec);
    const Teacher teacher(cfg.model.dims.class_count, cfg.teacher_error_rate, cfg.teacher_seed);
    std::vector<std::uint32_t> labels;
    labels.reserve(stream.size());
    for (const auto& s : stream) labels.push_back(teacher.label(s));

    const auto [host, port] = split_address(connect);
    auto transport = tcp_connect(host, port);
    EdgeRunner runner(EdgeAgent(edge_id, initial_student(cfg, spec, seed), cfg.filter), *transport, rcfg);
    g_runner = &runner;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const auto stats = runner.run(stream, labels);
    g_runner = nullptr;

    nlohmann::ordered_json j{{"edge_id", edge_id},
                             {"inferences", stats.inferences},
                             {"accuracy", stats.accuracy()},
                             {"windows", stats.windows},
                             {"batches_sent", stats.batches_sent},
                             {"updates_applied", stats.updates_applied},
                             {"stale_updates", stats.stale_updates},
                             {"resyncs", stats.resyncs},
                             {"dropped", stats.dropped},
                             {"version", stats.version}};
    std::cout << j.dump() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "edge: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
