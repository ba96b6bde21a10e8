#pragma once

#include <functional>
#include <string>

namespace latentsearch {

using WarningSink = std::function<void(const std::string&)>;

/// Replaces the warning sink (default: stderr). Passing an empty function
/// restores the default.
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace latentsearch
