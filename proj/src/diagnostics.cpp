#include "veil/diagnostics.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace veil {

namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

WarningSink& active_sink() {
    static WarningSink sink;
    return sink;
}

}  // namespace

void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex());
    if (auto& sink = active_sink()) {
        sink(message);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

WarningSink set_warning_sink(WarningSink sink) {
    std::lock_guard lock(sink_mutex());
    return std::exchange(active_sink(), std::move(sink));
}

}  // namespace veil
