#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sizer {

/// A SPICE engineering-notation number that remembers its source text.
///
/// The decimal mantissa and power of ten are kept separately so the value can
/// be re-expressed in another unit (e.g. metres to micrometres) without a
/// binary rounding step: `EngNumber::parse("0.18u").in_unit(-6) == 0.18`.
struct EngNumber {
  double value = 0.0;
  std::string rendered;

  static EngNumber parse(std::string_view token);
  static EngNumber from_value(double v);

  /// Value expressed in units of 10^unit_exp, rounded once from decimal.
  double in_unit(int unit_exp) const;

  friend bool operator==(const EngNumber& a, const EngNumber& b) {
    return a.value == b.value && a.rendered == b.rendered;
  }
};

/// SPICE numeric semantics: t g meg k m u n p f (case-insensitive, `meg`
/// before `m`), trailing unit letters ignored. Throws Error{malformed_number}.
double parse_eng(std::string_view token);

/// Shortest rendering with an engineering suffix such that
/// parse_eng(format_eng(x)) == x exactly.
std::string format_eng(double value);

/// Micrometre value rendered with a `u` suffix, exact under in_unit(-6).
std::string format_um(double um);

enum class ParamField { W, L, M, VALUE };

struct ParamPatch {
  std::string target;
  ParamField field = ParamField::VALUE;
  EngNumber value;  // integer for M

  static ParamPatch w(std::string target, std::string_view token);
  static ParamPatch l(std::string target, std::string_view token);
  static ParamPatch m(std::string target, int count);
  static ParamPatch cap(std::string target, std::string_view token);

  friend bool operator==(const ParamPatch&, const ParamPatch&) = default;
};

std::string_view to_string(ParamField field);

struct TokenSpan {
  std::size_t pos = 0;
  std::size_t len = 0;
};

struct DeviceCard {
  std::string name;  // as written
  std::string model;
  EngNumber w, l;
  int m = 1;
  std::size_t line_index = 0;
  TokenSpan w_span, l_span;
  std::optional<TokenSpan> m_span;
};

struct CapacitorCard {
  std::string name;
  EngNumber value;
  std::size_t line_index = 0;
  TokenSpan value_span;
};

/// Line-preserving view over a SPICE-subset netlist. Indexes use canonical
/// uppercase names.
struct NetlistDoc {
  std::vector<std::string> lines;
  bool trailing_newline = true;
  std::map<std::string, DeviceCard> devices;
  std::map<std::string, CapacitorCard> capacitors;

  std::string text() const;
};

NetlistDoc parse_netlist(std::string_view text);

/// Token-level edits; bytes outside the edited value tokens are untouched.
NetlistDoc apply_patches(const NetlistDoc& doc, const std::vector<ParamPatch>& patches);

struct DeviceGeom {
  double w = 1.0;  // um, per finger
  double l = 0.18; // um
  int m = 1;

  friend bool operator==(const DeviceGeom&, const DeviceGeom&) = default;
};

inline constexpr std::size_t kNumRoles = 7;  // M1..M7

/// Sizing state of the fixed two-stage topology. Index i holds M(i+1).
struct CircuitParams {
  std::array<DeviceGeom, kNumRoles> dev{};
  double c1 = 1e-12;  // F, Miller capacitor
  double cl = 2e-12;  // F, load

  DeviceGeom& M(int n) { return dev[static_cast<std::size_t>(n - 1)]; }
  const DeviceGeom& M(int n) const { return dev[static_cast<std::size_t>(n - 1)]; }

  /// Sum of W*L*m over M1..M7 in um^2.
  double gate_area_um2() const;

  friend bool operator==(const CircuitParams&, const CircuitParams&) = default;
};

/// Which netlist element plays each role.
struct NameMap {
  std::array<std::string, kNumRoles> devices{"M1", "M2", "M3", "M4", "M5", "M6", "M7"};
  std::string c1 = "C1";
  std::string cl = "CL";
  double default_cl = 2e-12;

  static NameMap defaults() { return {}; }
};

/// Throws Error{missing_device} naming the absent element.
CircuitParams extract_params(const NetlistDoc& doc, const NameMap& names = NameMap{});

/// Patches that move `from` to `to` (only differing fields), in role order.
std::vector<ParamPatch> diff_params(const CircuitParams& from, const CircuitParams& to,
                                    const NameMap& names = NameMap{});

/// Full patch set restating every role value.
std::vector<ParamPatch> restate_params(const CircuitParams& params,
                                       const NameMap& names = NameMap{});

/// Standard two-stage Miller op-amp netlist (nmos input pair, pmos mirror
/// load, pmos common-source output) carrying `params`.
std::string synthesize_netlist(const CircuitParams& params);

}  // namespace sizer
