#include "emsrisk/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace emsrisk::log {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}

std::atomic<std::size_t> g_count{0};

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  Sink previous = std::move(current_sink());
  current_sink() = std::move(sink);
  return previous;
}

void warn(const std::string& message) {
  ++g_count;
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(message);
}

std::size_t warning_count() { return g_count.load(); }
void reset_warning_count() { g_count = 0; }

}  // namespace emsrisk::log
