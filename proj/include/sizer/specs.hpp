#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "sizer/backends.hpp"
#include "sizer/netlist.hpp"
#include "sizer/types.hpp"

namespace sizer {

enum class Metric { GAIN, GBW, PM, SR, IDC };
enum class Direction { at_least, at_most };
enum class EvalMode { tt, corner };

inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::GAIN, Metric::GBW, Metric::PM,
                                                      Metric::SR, Metric::IDC};

std::string_view to_string(Metric m);
std::string_view to_string(Direction d);
std::optional<Metric> parse_metric(std::string_view text);

/// Value of `m` in PerfMetrics units (dB, Hz, deg, V/us, A).
double metric_value(const PerfMetrics& pm, Metric m);

/// Human-readable value with the display unit, e.g. "25.30 MHz".
std::string format_metric(Metric m, double value);

struct SpecItem {
  Metric metric = Metric::GAIN;
  Direction direction = Direction::at_least;
  double tt_target = 0.0;
  double corner_factor = 1.0;

  double corner_target() const { return tt_target * corner_factor; }
};

struct SpecSet {
  std::array<SpecItem, 5> items;  // indexed by Metric

  const SpecItem& operator[](Metric m) const { return items[static_cast<std::size_t>(m)]; }
  SpecItem& operator[](Metric m) { return items[static_cast<std::size_t>(m)]; }

  /// Gain > 60 dB, GBW > 20 MHz, PM > 60 deg, SR > 20 V/us, Idc < 200 uA,
  /// with corner factors 0.90, 0.95, 0.90, 0.90, 1.20.
  static SpecSet defaults();

  /// Lines of `metric=GBW direction=at_least tt_target=20meg corner_factor=0.95`.
  static SpecSet load(const std::filesystem::path& path);
  static SpecSet parse(std::string_view text);
  std::string serialize() const;
};

struct MetricEval {
  double value = 0.0;
  double target = 0.0;
  double margin_frac = 0.0;  // signed toward passing
  bool pass = false;

  friend bool operator==(const MetricEval&, const MetricEval&) = default;
};

struct EvalReport {
  std::array<MetricEval, 5> metrics{};
  bool all_pass = false;

  const MetricEval& operator[](Metric m) const { return metrics[static_cast<std::size_t>(m)]; }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

EvalReport evaluate_specs(const PerfMetrics& metrics, const SpecSet& specs, EvalMode mode);

std::array<double, 5> derated_targets(const SpecSet& specs);

struct WorstEntry {
  double value = 0.0;
  ProcessCorner corner = ProcessCorner::TT;
};

/// Minimum for at_least metrics, maximum for at_most; ties go to the
/// earlier corner in TT, FF, SS, FS, SF order. Throws Error{empty_input}.
std::array<WorstEntry, 5> worst_case(const std::map<ProcessCorner, PerfMetrics>& per_corner,
                                     const SpecSet& specs = SpecSet::defaults());

struct FomReport {
  std::string formula;
  double fom = 0.0;
  double area_um2 = 0.0;
  double foma = 0.0;
};

/// Built-in formulas: `gbw_cl_over_idc` = GBW[MHz]*CL[pF]/Idc[mA] (default),
/// `sr_cl_over_idc` = SR[V/us]*CL[pF]/Idc[mA]. Throws Error{unknown_formula}.
FomReport compute_fom(const PerfMetrics& metrics, const CircuitParams& params,
                      std::string_view formula = "gbw_cl_over_idc");

inline double foma_of(double fom, double area_um2) { return fom / area_um2; }

/// Table-style rendering: metric, target, value, margin, status.
std::string format_report_table(const EvalReport& report);

}  // namespace sizer
