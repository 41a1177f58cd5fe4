#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affectfuse {

// Every failure surfaced by the library carries one of these codes. The C API
// maps them one-to-one onto afx_status values, so keep the order in sync with
// affectfuse.h.
enum class Errc : int {
  ok = 0,
  invalid_argument,
  config_error,
  io_error,
  missing_column,
  non_uniform_sampling,
  non_finite_sample,
  range_violation,
  orphan_file,
  malformed_name,
  invalid_spec,
  invalid_cutoff,
  signal_too_short,
  window_too_small,
  invalid_window,
  too_short,
  too_few_peaks,
  unknown_kind,
  timestamp_out_of_range,
  delay_out_of_range,
  empty_input,
  incomplete_index,
  no_matching_model,
  shape_mismatch,
  empty_members,
  length_mismatch,
  empty_list,
  empty,
  empty_fold,
  schema_mismatch,
  internal,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

  // Re-throws with extra context prepended ("fold 2: ...").
  [[noreturn]] void rethrow_with(std::string_view context) const {
    throw Error(code_, std::string(context) + ": " + what());
  }

 private:
  Errc code_;
};

}  // namespace affectfuse
