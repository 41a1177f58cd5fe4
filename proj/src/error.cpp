#include "affectfuse/error.hpp"

namespace affectfuse {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ok: return "Ok";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::config_error: return "ConfigError";
    case Errc::io_error: return "IoError";
    case Errc::missing_column: return "MissingColumn";
    case Errc::non_uniform_sampling: return "NonUniformSampling";
    case Errc::non_finite_sample: return "NonFiniteSample";
    case Errc::range_violation: return "RangeViolation";
    case Errc::orphan_file: return "OrphanFile";
    case Errc::malformed_name: return "MalformedName";
    case Errc::invalid_spec: return "InvalidSpec";
    case Errc::invalid_cutoff: return "InvalidCutoff";
    case Errc::signal_too_short: return "SignalTooShort";
    case Errc::window_too_small: return "WindowTooSmall";
    case Errc::invalid_window: return "InvalidWindow";
    case Errc::too_short: return "TooShort";
    case Errc::too_few_peaks: return "TooFewPeaks";
    case Errc::unknown_kind: return "UnknownKind";
    case Errc::timestamp_out_of_range: return "TimestampOutOfRange";
    case Errc::delay_out_of_range: return "DelayOutOfRange";
    case Errc::empty_input: return "EmptyInput";
    case Errc::incomplete_index: return "IncompleteIndex";
    case Errc::no_matching_model: return "NoMatchingModel";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::empty_members: return "EmptyMembers";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::empty_list: return "EmptyList";
    case Errc::empty: return "Empty";
    case Errc::empty_fold: return "EmptyFold";
    case Errc::schema_mismatch: return "SchemaMismatch";
    case Errc::internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace affectfuse
