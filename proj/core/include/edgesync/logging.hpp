#pragma once

#include <string>

namespace edgesync {

inline constexpr const char* kLogLevelEnv = "EDGESYNC_LOG_LEVEL";

/// Sets the library log level. An empty string falls back to the
/// EDGESYNC_LOG_LEVEL environment variable, then to `fallback`.
/// Accepts trace, debug, info, warn, error, off. Throws Config otherwise.
void configure_logging(const std::string& level = {}, const std::string& fallback = "warn");

}  // namespace edgesync
