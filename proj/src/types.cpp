#include "sizer/types.hpp"

#include <algorithm>
#include <cctype>

namespace sizer {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(DeviceKind kind) {
  return kind == DeviceKind::nmos ? "nmos" : "pmos";
}

std::string_view to_string(ProcessCorner corner) {
  switch (corner) {
    case ProcessCorner::TT: return "TT";
    case ProcessCorner::FF: return "FF";
    case ProcessCorner::SS: return "SS";
    case ProcessCorner::FS: return "FS";
    case ProcessCorner::SF: return "SF";
  }
  return "??";
}

std::optional<DeviceKind> parse_device_kind(std::string_view text) {
  const auto s = lower(text);
  if (s == "nmos") return DeviceKind::nmos;
  if (s == "pmos") return DeviceKind::pmos;
  return std::nullopt;
}

std::optional<ProcessCorner> parse_corner(std::string_view text) {
  const auto s = lower(text);
  for (auto c : kAllCorners) {
    if (lower(to_string(c)) == s) return c;
  }
  return std::nullopt;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::domain: return "domain";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::unreachable: return "unreachable";
    case ErrorCode::width_limit: return "width_limit";
    case ErrorCode::format: return "format";
    case ErrorCode::malformed_number: return "malformed_number";
    case ErrorCode::duplicate_name: return "duplicate_name";
    case ErrorCode::missing_field: return "missing_field";
    case ErrorCode::unknown_target: return "unknown_target";
    case ErrorCode::illegal_field: return "illegal_field";
    case ErrorCode::missing_device: return "missing_device";
    case ErrorCode::bias_infeasible: return "bias_infeasible";
    case ErrorCode::no_crossing: return "no_crossing";
    case ErrorCode::non_monotonic: return "non_monotonic";
    case ErrorCode::missing_crossing: return "missing_crossing";
    case ErrorCode::spawn_failed: return "spawn_failed";
    case ErrorCode::process_failed: return "process_failed";
    case ErrorCode::timeout: return "timeout";
    case ErrorCode::garbled_output: return "garbled_output";
    case ErrorCode::unknown_formula: return "unknown_formula";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::missing_action_block: return "missing_action_block";
    case ErrorCode::unparseable_assignment: return "unparseable_assignment";
    case ErrorCode::bounds_violation: return "bounds_violation";
    case ErrorCode::auth: return "auth";
    case ErrorCode::transport: return "transport";
    case ErrorCode::empty_completion: return "empty_completion";
    case ErrorCode::io: return "io";
    case ErrorCode::corrupt_record: return "corrupt_record";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

}  // namespace sizer
