#pragma once

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string_view>

namespace ttdsr {

/// Applies TTDSR_LOG (quiet | info | debug) to the default stderr logger.
/// Unset or unrecognized values keep warnings and errors only.
inline void configure_logging_from_env() {
    auto logger = spdlog::stderr_logger_mt("ttdsr");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);

    const char* env = std::getenv("TTDSR_LOG");
    const std::string_view level = env ? env : "";
    if (level == "quiet") {
        spdlog::set_level(spdlog::level::off);
    } else if (level == "info") {
        spdlog::set_level(spdlog::level::info);
    } else if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else {
        spdlog::set_level(spdlog::level::warn);
    }
}

}  // namespace ttdsr
