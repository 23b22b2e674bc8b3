#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sizer {

enum class DeviceKind { nmos, pmos };

// FS = fast nmos / slow pmos, SF the reverse.
enum class ProcessCorner { TT, FF, SS, FS, SF };

inline constexpr std::array<ProcessCorner, 5> kAllCorners = {
    ProcessCorner::TT, ProcessCorner::FF, ProcessCorner::SS,
    ProcessCorner::FS, ProcessCorner::SF};

inline constexpr std::array<DeviceKind, 2> kAllKinds = {DeviceKind::nmos,
                                                        DeviceKind::pmos};

std::string_view to_string(DeviceKind kind);
std::string_view to_string(ProcessCorner corner);
std::optional<DeviceKind> parse_device_kind(std::string_view text);
std::optional<ProcessCorner> parse_corner(std::string_view text);

enum class ErrorCode {
  domain,             // device model precondition
  out_of_range,       // LUT query outside axis hull
  unreachable,        // gm/Id target outside achievable range
  width_limit,        // sizing produced W above the configured maximum
  format,             // LUT / spec / log file format problems
  malformed_number,   // engineering-notation token
  duplicate_name,
  missing_field,
  unknown_target,
  illegal_field,
  missing_device,
  bias_infeasible,
  no_crossing,
  non_monotonic,
  missing_crossing,
  spawn_failed,
  process_failed,
  timeout,
  garbled_output,
  unknown_formula,
  empty_input,
  missing_action_block,
  unparseable_assignment,
  bounds_violation,
  auth,
  transport,
  empty_completion,
  io,
  corrupt_record,
  config,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sizer
