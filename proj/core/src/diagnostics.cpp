#include "cellmetry/diagnostics.hpp"

#include <iostream>
#include <mutex>

namespace cellmetry {
namespace {

std::mutex sink_mutex;
MessageSink warning_sink;
MessageSink progress_sink;

}  // namespace

void warn(std::string_view message) {
    std::lock_guard lock(sink_mutex);
    if (warning_sink) {
        warning_sink(message);
    } else {
        std::cerr << "WARNING " << message << '\n';
    }
}

void set_warning_sink(MessageSink sink) {
    std::lock_guard lock(sink_mutex);
    warning_sink = std::move(sink);
}

void progress(std::string_view step, int percent) {
    std::lock_guard lock(sink_mutex);
    if (progress_sink) progress_sink("PROGRESS " + std::string(step) + " " + std::to_string(percent));
}

void set_progress_sink(MessageSink sink) {
    std::lock_guard lock(sink_mutex);
    progress_sink = std::move(sink);
}

ScopedWarningCapture::ScopedWarningCapture() {
    std::lock_guard lock(sink_mutex);
    previous_ = std::move(warning_sink);
    warning_sink = [this](std::string_view m) { messages_.emplace_back(m); };
}

ScopedWarningCapture::~ScopedWarningCapture() {
    std::lock_guard lock(sink_mutex);
    warning_sink = std::move(previous_);
}

bool ScopedWarningCapture::contains(std::string_view fragment) const {
    for (const auto& m : messages_) {
        if (m.find(fragment) != std::string::npos) return true;
    }
    return false;
}

}  // namespace cellmetry
