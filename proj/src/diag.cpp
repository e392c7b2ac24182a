#include "flydraw/diag.hpp"

#include <iostream>
#include <mutex>

namespace flydraw {

namespace {

std::mutex sink_mutex;

WarningSink& sink() {
  static WarningSink s = [](const std::string& m) { std::cerr << "warning: " << m << "\n"; };
  return s;
}

}  // namespace

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex);
  if (sink()) sink()(message);
}

WarningSink set_warning_sink(WarningSink s) {
  std::lock_guard lock(sink_mutex);
  WarningSink old = std::move(sink());
  sink() = std::move(s);
  return old;
}

}  // namespace flydraw
