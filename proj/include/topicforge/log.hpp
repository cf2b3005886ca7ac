#pragma once

#include <functional>
#include <string>

namespace topicforge {

enum class LogLevel { debug, info, warning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Replaces the process-wide sink. Default writes warnings to stderr.
// Returns the previous sink.
LogSink set_log_sink(LogSink sink);
void log(LogLevel level, const std::string& message);

inline void log_warning(const std::string& message) { log(LogLevel::warning, message); }
inline void log_info(const std::string& message) { log(LogLevel::info, message); }

}  // namespace topicforge
