#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>

namespace rsd {

// Warnings are routed through a replaceable sink so the CLI can honour
// verbosity and tests can capture them.
using WarningSink = std::function<void(const std::string&)>;

namespace detail {

struct WarningState {
  std::mutex mutex;
  WarningSink sink = [](const std::string& message) {
    std::cerr << "warning: " << message << '\n';
  };
};

inline WarningState& warning_state() {
  static WarningState state;
  return state;
}

}  // namespace detail

inline WarningSink set_warning_sink(WarningSink sink) {
  auto& state = detail::warning_state();
  std::lock_guard lock(state.mutex);
  return std::exchange(state.sink, std::move(sink));
}

inline void warn(const std::string& message) {
  auto& state = detail::warning_state();
  std::lock_guard lock(state.mutex);
  if (state.sink) state.sink(message);
}

// Restores the previous sink on scope exit.
class ScopedWarningSink {
 public:
  explicit ScopedWarningSink(WarningSink sink) : previous_(set_warning_sink(std::move(sink))) {}
  ~ScopedWarningSink() { set_warning_sink(std::move(previous_)); }
  ScopedWarningSink(const ScopedWarningSink&) = delete;
  ScopedWarningSink& operator=(const ScopedWarningSink&) = delete;

 private:
  WarningSink previous_;
};

}  // namespace rsd
