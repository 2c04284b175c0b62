#include "teach/common/logging.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <mutex>

namespace teach {

void init_logging() {
    static std::once_flag once;
    std::call_once(once, [] {
        auto logger = spdlog::stderr_color_mt("teach");
        spdlog::set_default_logger(logger);
        const char* level = std::getenv("TEACH_LOG");
        spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
    });
}

}  // namespace teach
