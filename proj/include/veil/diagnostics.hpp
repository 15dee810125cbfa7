#pragma once

#include <functional>
#include <string>

namespace veil {

using WarningSink = std::function<void(const std::string&)>;

// Emits a non-fatal diagnostic. The default sink writes "warning: <msg>" to stderr.
void warn(const std::string& message);

// Replaces the active sink and returns the previous one. Passing an empty
// function restores the stderr sink.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace veil
