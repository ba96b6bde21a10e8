#include "log.hpp"

#include <iostream>
#include <mutex>

namespace latentsearch {

namespace {
std::mutex g_sink_mu;
WarningSink g_sink;
}  // namespace

void set_warning_sink(WarningSink sink) {
  std::lock_guard lock(g_sink_mu);
  g_sink = std::move(sink);
}

void warn(const std::string& message) {
  std::lock_guard lock(g_sink_mu);
  if (g_sink) {
    g_sink(message);
  } else {
    std::cerr << "latentsearch: warning: " << message << '\n';
  }
}

}  // namespace latentsearch
