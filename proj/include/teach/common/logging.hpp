#pragma once

#include <spdlog/spdlog.h>

namespace teach {

/// Configures the default spdlog logger from the TEACH_LOG environment
/// variable (trace|debug|info|warn|error|off). Defaults to "warn".
void init_logging();

}  // namespace teach
