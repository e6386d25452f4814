#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace cellmetry {

using MessageSink = std::function<void(std::string_view)>;

/// Warnings go to stderr as `WARNING <text>` unless a sink is installed.
void warn(std::string_view message);
void set_warning_sink(MessageSink sink);

/// Progress lines (`PROGRESS <step> <pct>`) are silent unless a sink is installed.
void progress(std::string_view step, int percent);
void set_progress_sink(MessageSink sink);

// Collects warnings for the lifetime of the object; restores the previous sink.
class ScopedWarningCapture {
public:
    ScopedWarningCapture();
    ~ScopedWarningCapture();
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(std::string_view fragment) const;

private:
    std::vector<std::string> messages_;
    MessageSink previous_;
};

}  // namespace cellmetry
