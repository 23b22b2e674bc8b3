#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sizer/gmid_lut.hpp"
#include "sizer/netlist.hpp"
#include "sizer/types.hpp"

namespace sizer {

struct PerfMetrics {
  double gain_db = 0.0;
  double gbw_hz = 0.0;
  double pm_deg = 0.0;
  double sr_v_per_us = 0.0;
  double idc_a = 0.0;

  friend bool operator==(const PerfMetrics&, const PerfMetrics&) = default;
};

struct AcPoint {
  double freq = 0.0;       // Hz
  double mag_db = 0.0;
  double phase_deg = 0.0;  // unwrapped
};

struct WavePoint {
  double t = 0.0;  // s
  double v = 0.0;  // V
};

struct BiasConfig {
  double i_ref = 10e-6;  // A, reference branch current
};

/// Operating point of the two-stage amplifier. Arrays are indexed by role
/// (0 = M1 ... 6 = M7); gm and gds are device totals (scaled by W*m).
struct BiasSolution {
  double i_tail = 0.0;
  double i_stage2 = 0.0;
  std::array<double, kNumRoles> current{};
  std::array<double, kNumRoles> vgs{};
  std::array<double, kNumRoles> gm{};
  std::array<double, kNumRoles> gds{};

  double vgs1() const { return vgs[0]; }
  double vgs7() const { return vgs[6]; }
};

/// Device polarity per role: M1, M2, M5, M6 nmos; M3, M4, M7 pmos.
DeviceKind role_kind(std::size_t role);

/// Branch currents: i_tail = i_ref*m(M5), i_stage2 = i_ref*m(M6); each
/// device's Vgs is found by bisection on the LUT current density.
/// Throws Error{bias_infeasible}.
BiasSolution solve_bias(const CircuitParams& params, const LutSet& luts,
                        ProcessCorner corner, const BiasConfig& config = {});

/// Closed-form small-signal metrics of the pole-split amplifier.
struct SmallSignal {
  double gm1, gm7, gds2, gds4, gds6, gds7;
  double cc, cl;
  double i_ref, i_tail, i_stage2;
};

PerfMetrics small_signal_metrics(const SmallSignal& s);

PerfMetrics analytic_evaluate(const CircuitParams& params, const LutSet& luts,
                              ProcessCorner corner, const BiasConfig& config = {});

struct AcMetrics {
  double gain_db = 0.0;
  double gbw_hz = 0.0;
  double pm_deg = 0.0;
};

/// Gain at the lowest frequency, unity crossing by log-frequency
/// interpolation, PM = 180 + phase at the crossing.
/// Throws Error{no_crossing} / Error{non_monotonic}.
AcMetrics extract_ac_metrics(std::span<const AcPoint> sweep);

/// 10%-90% rising-edge slew rate in V/us. Throws Error{missing_crossing}.
double extract_sr(std::span<const WavePoint> wave, double v_lo, double v_hi);

/// Evaluation backend used by the orchestrator.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::string name() const = 0;
  virtual PerfMetrics evaluate(const NetlistDoc& doc, const CircuitParams& params,
                               ProcessCorner corner, int iteration) = 0;
  /// True when evaluate() may be called concurrently for different corners.
  virtual bool concurrent_corners() const { return true; }
};

class AnalyticEvaluator final : public Evaluator {
 public:
  AnalyticEvaluator(const LutSet& luts, BiasConfig config = {})
      : luts_(luts), config_(config) {}
  std::string name() const override { return "analytic"; }
  PerfMetrics evaluate(const NetlistDoc&, const CircuitParams& params, ProcessCorner corner,
                       int) override {
    return analytic_evaluate(params, luts_, corner, config_);
  }

 private:
  const LutSet& luts_;
  BiasConfig config_;
};

struct SpiceConfig {
  std::string command = "ngspice";  // argv[0]; the deck path is appended as `-b deck.cir`
  std::vector<std::string> extra_args;
  std::map<ProcessCorner, std::string> corner_includes;
  std::chrono::seconds timeout{120};
  std::filesystem::path work_root = "sizer-work";
  std::string run_id = "run";
  std::string output_node = "out";
  std::string supply_source = "VDD";
};

/// Control deck appended to the netlist: operating point, AC sweep
/// 10 Hz..1 GHz at 20 points/decade, transient step. Exports ac.out,
/// tran.out and op.out as header-free columns.
std::string control_deck(const SpiceConfig& config);

/// Netlist (minus `.end`) + corner include + control deck.
std::string spice_deck(const NetlistDoc& doc, ProcessCorner corner, const SpiceConfig& config);

std::vector<AcPoint> parse_ac_table(const std::filesystem::path& path);
std::vector<WavePoint> parse_wave_table(const std::filesystem::path& path);
double parse_op_current(const std::filesystem::path& path);

/// Runs the external simulator in an isolated directory
/// `<work_root>/<run_id>-it<iteration>-<corner>`; removed on success, kept on
/// failure.
PerfMetrics spice_evaluate(const NetlistDoc& doc, ProcessCorner corner,
                           const SpiceConfig& config, int iteration = 0);

class SpiceEvaluator final : public Evaluator {
 public:
  explicit SpiceEvaluator(SpiceConfig config) : config_(std::move(config)) {}
  std::string name() const override { return "spice"; }
  PerfMetrics evaluate(const NetlistDoc& doc, const CircuitParams&, ProcessCorner corner,
                       int iteration) override {
    return spice_evaluate(doc, corner, config_, iteration);
  }

 private:
  SpiceConfig config_;
};

/// Result of running a child process with a wall-clock limit.
struct ProcessResult {
  int exit_code = 0;
  std::string stdout_text;
  std::string stderr_text;
};

/// fork/exec in `cwd`; throws Error{spawn_failed} or Error{timeout}.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::filesystem::path& cwd, std::chrono::milliseconds timeout);

}  // namespace sizer
