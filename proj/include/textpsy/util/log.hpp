#pragma once

#include <functional>
#include <string>

namespace textpsy::log {

using Sink = std::function<void(const std::string&)>;

// Replaces the warning sink and returns the previous one. The default sink
// writes "warning: <msg>" to stderr.
Sink set_warning_sink(Sink sink);

void warn(const std::string& msg);
void info(const std::string& msg);
void set_quiet(bool quiet);

}  // namespace textpsy::log
