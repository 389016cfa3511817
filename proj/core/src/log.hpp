#pragma once

// Internal logger. Lines are key=value pairs so they grep and parse easily.

#include <spdlog/spdlog.h>

namespace edgesync::detail {

spdlog::logger& logger();

}  // namespace edgesync::detail
