#pragma once

#include <stdexcept>
#include <string>

namespace sentinel {

// Every recoverable failure in the library throws Error with one of these
// codes. Tests and the CLI dispatch on the code, not the message text.
enum class Errc {
  bound_violation,
  weight_sum_violation,
  unknown_topic,
  duplicate_subscriber,
  payload_mismatch,
  lag_overflow,
  degenerate_frame,
  stream_unavailable,
  unknown_camera,
  shape_not_divisible,
  backend_failure,
  unknown_scenario_class,
  zero_vector,
  dimension_mismatch,
  empty_class,
  zero_mean,
  unknown_label,
  unsorted_input,
  empty_run,
  window_too_large,
  io_failure,
  config_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace sentinel
