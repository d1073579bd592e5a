#include "textpsy/util/log.hpp"

#include <iostream>
#include <mutex>

namespace textpsy::log {
namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

Sink& current_sink() {
    static Sink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return sink;
}

bool& quiet_flag() {
    static bool quiet = false;
    return quiet;
}

}  // namespace

Sink set_warning_sink(Sink sink) {
    std::lock_guard lock(sink_mutex());
    Sink previous = std::move(current_sink());
    current_sink() = std::move(sink);
    return previous;
}

void warn(const std::string& msg) {
    std::lock_guard lock(sink_mutex());
    if (current_sink()) current_sink()(msg);
}

void info(const std::string& msg) {
    std::lock_guard lock(sink_mutex());
    if (!quiet_flag()) std::cerr << msg << '\n';
}

void set_quiet(bool quiet) {
    std::lock_guard lock(sink_mutex());
    quiet_flag() = quiet;
}

}  // namespace textpsy::log
