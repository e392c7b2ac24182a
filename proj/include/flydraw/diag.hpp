#pragma once

#include <functional>
#include <string>

namespace flydraw {

// Non-fatal diagnostics. Defaults to stderr; tests and the service replace
// the sink.
using WarningSink = std::function<void(const std::string&)>;

void warn(const std::string& message);
WarningSink set_warning_sink(WarningSink sink);

}  // namespace flydraw
