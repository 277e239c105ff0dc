#pragma once

#include <functional>
#include <string>

namespace dream {

using WarningSink = std::function<void(const std::string&)>;

/// Emits a warning through the installed sink (stderr by default).
void warn(const std::string& message);

/// Installs a sink; returns the previous one. An empty sink restores stderr.
WarningSink set_warning_sink(WarningSink sink);

void info(const std::string& message);
void set_quiet(bool quiet);

}  // namespace dream
