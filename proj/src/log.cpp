#include "dream/log.hpp"

#include <iostream>

namespace dream {

namespace {

WarningSink& sink() {
  static WarningSink s;
  return s;
}

bool& quiet_flag() {
  static bool q = false;
  return q;
}

}  // namespace

void warn(const std::string& message) {
  if (sink()) {
    sink()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

WarningSink set_warning_sink(WarningSink s) {
  auto previous = std::move(sink());
  sink() = std::move(s);
  return previous;
}

void info(const std::string& message) {
  if (!quiet_flag()) std::cerr << message << '\n';
}

void set_quiet(bool quiet) { quiet_flag() = quiet; }

}  // namespace dream
