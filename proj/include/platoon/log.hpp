#pragma once

namespace platoon::logging {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Current level, parsed once from PLATOON_LOG_LEVEL (error|warn|info|debug).
/// Defaults to warn.
Level level();

void write(Level lvl, const char* fmt, ...);

}  // namespace platoon::logging

#define PLATOON_LOG_ERROR(...) ::platoon::logging::write(::platoon::logging::Level::error, __VA_ARGS__)
#define PLATOON_LOG_WARN(...) ::platoon::logging::write(::platoon::logging::Level::warn, __VA_ARGS__)
#define PLATOON_LOG_INFO(...) ::platoon::logging::write(::platoon::logging::Level::info, __VA_ARGS__)
#define PLATOON_LOG_DEBUG(...) ::platoon::logging::write(::platoon::logging::Level::debug, __VA_ARGS__)
