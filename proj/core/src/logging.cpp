#include "edgesync/logging.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_sinks.h>

#include "edgesync/error.hpp"
#include "log.hpp"

namespace edgesync {
namespace detail {

spdlog::logger& logger() {
  static auto instance = [] {
    auto l = spdlog::stderr_logger_mt("edgesync");
    l->set_pattern("%Y-%m-%dT%H:%M:%S.%e level=%l %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return *instance;
}

}  // namespace detail

void configure_logging(const std::string& level, const std::string& fallback) {
  std::string chosen = level;
  if (chosen.empty()) {
    if (const char* env = std::getenv(kLogLevelEnv); env != nullptr && *env != '\0') chosen = env;
  }
  if (chosen.empty()) chosen = fallback;
  const auto parsed = spdlog::level::from_str(chosen);
  // from_str maps unknown names to off; only accept that for "off" itself.
  if (parsed == spdlog::level::off && chosen != "off") {
    throw Error(Errc::Config, "unknown log level '" + chosen + "'");
  }
  detail::logger().set_level(parsed);
}

}  // namespace edgesync
