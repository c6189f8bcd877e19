#pragma once

#include <functional>
#include <string>

namespace emsrisk::log {

using Sink = std::function<void(const std::string&)>;

/// Replaces the warning sink and returns the previous one. The default sink
/// writes "warning: <msg>" to stderr. Passing an empty function silences.
Sink set_sink(Sink sink);

void warn(const std::string& message);

/// Number of warnings emitted since process start (or the last reset).
std::size_t warning_count();
void reset_warning_count();

/// Swaps in a sink for the lifetime of the guard.
class ScopedSink {
public:
  explicit ScopedSink(Sink sink) : previous_(set_sink(std::move(sink))) {}
  ~ScopedSink() { set_sink(std::move(previous_)); }
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

private:
  Sink previous_;
};

}  // namespace emsrisk::log
