#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sizer/backends.hpp"
#include "sizer/netlist.hpp"
#include "sizer/specs.hpp"
#include "sizer/strategy.hpp"

namespace sizer {

struct RunConfig {
  int max_tt_iters = 15;
  int max_corner_iters = 5;
  std::vector<ProcessCorner> corners{kAllCorners.begin(), kAllCorners.end()};
  std::size_t stall_window = 6;
  double plateau_threshold = 0.01;  // margin_frac gain that counts as progress
  std::size_t history_k = 5;
  SpecSet specs = SpecSet::defaults();
  NameMap names;
  std::filesystem::path log_path;  // empty: keep the history in memory only

  /// Throws Error{config}.
  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  Phase phase = Phase::tt;
  bool probe = false;  // corner check right after a TT pass; not counted as an iteration
  CircuitParams params;
  ActionPlan plan;
  std::map<ProcessCorner, PerfMetrics> metrics;
  std::map<ProcessCorner, EvalReport> reports;
  bool all_pass = false;
  double wall_ms = 0.0;
  int attempts = 0;
  std::string prompt_ref;
  std::string reply_ref;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

enum class RunStatus { converged, iteration_limit, stalled, error };
std::string_view to_string(RunStatus s);
std::optional<RunStatus> parse_run_status(std::string_view text);

struct StallEvidence {
  enum class Kind { cycle, plateau, oscillation, gave_up } kind = Kind::cycle;
  std::string detail;
};
std::string_view to_string(StallEvidence::Kind k);

struct RunOutcome {
  RunStatus status = RunStatus::error;
  std::vector<IterationRecord> history;
  std::optional<StallEvidence> stall;
  std::optional<FomReport> fom;
  std::string error;

  const IterationRecord* final_record() const {
    return history.empty() ? nullptr : &history.back();
  }
  int tt_iterations() const;
  int corner_iterations() const;
  int total_iterations() const { return tt_iterations() + corner_iterations(); }
};

/// Cycle: two records in the last `window` carry identical parameters.
/// Plateau: no metric failing at the newest record improved its margin by
/// more than `threshold` since the oldest record of the window.
/// Oscillation: the sequence of edited fields repeats with a period of 2 or
/// more across the window while the set of unmet specs is unchanged.
/// All need at least `window` records.
std::optional<StallEvidence> diagnose_stall(const std::vector<IterationRecord>& history,
                                            std::size_t window = 6, double threshold = 0.01);
bool detect_stall(const std::vector<IterationRecord>& history, std::size_t window = 6,
                  double threshold = 0.01);

/// Last `k` records, one line each: iteration, parameter changes, metrics.
std::string summarize_history(const std::vector<IterationRecord>& history, std::size_t k = 5,
                              const SpecSet& specs = SpecSet::defaults(),
                              const NameMap& names = NameMap{});

/// `it 3 tt    GAIN 48.41 dB FAIL | GBW ...` one-line status.
std::string format_record_line(const IterationRecord& r);

// ----------------------------------------------------------------------------
// Run log: JSON lines, a schema header first, then records, then an outcome.

inline constexpr int kRunLogVersion = 1;

std::string record_to_json(const IterationRecord& r);
IterationRecord record_from_json(std::string_view line);
std::string runlog_header_json();
std::string outcome_to_json(const RunOutcome& outcome);

class RunLog {
 public:
  /// Truncates `path` and writes the header. Side files go to `<path>.d/`.
  explicit RunLog(std::filesystem::path path);

  /// Appends one record line and flushes.
  void append(const IterationRecord& r);
  /// Writes `text` to `<path>.d/<name>` and returns the reference stored in the record.
  std::string attach(const std::string& name, std::string_view text);
  void finish(const RunOutcome& outcome);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct LoadedRun {
  std::vector<IterationRecord> records;
  std::optional<RunStatus> status;
  std::optional<StallEvidence> stall;
  std::string error;
  std::vector<std::string> warnings;
};

/// Tolerates a truncated final line (reported in `warnings`).
/// Throws Error{io}, Error{corrupt_record} with the line number.
LoadedRun load_run(const std::filesystem::path& path);

/// Converged runs must pass every configured corner at derated targets on the
/// final record; recomputed from logged metrics alone.
bool recheck_converged(const LoadedRun& run, const SpecSet& specs,
                       const std::vector<ProcessCorner>& corners);

// ----------------------------------------------------------------------------

/// Metrics looked up by exact parameter state, for replaying recorded runs.
class RecordedEvaluator final : public Evaluator {
 public:
  struct Entry {
    CircuitParams params;
    std::map<ProcessCorner, PerfMetrics> corners;
    std::string source;
  };

  /// JSON: {"entries":[{"params":{...},"source":"...","corners":{"TT":{...}}}]}.
  static RecordedEvaluator load(const std::filesystem::path& path);
  static RecordedEvaluator parse(std::string_view json_text);

  std::string name() const override { return "stub-fixtures"; }
  /// Throws Error{config} when the state or corner was not recorded.
  PerfMetrics evaluate(const NetlistDoc& doc, const CircuitParams& params, ProcessCorner corner,
                       int iteration) override;

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

using RecordCallback = std::function<void(const IterationRecord&)>;

/// Closed loop: TT phase, then the corner phase after a TT pass.
RunOutcome run_optimization(const RunConfig& config, Strategist& strategist, Evaluator& evaluator,
                            const NetlistDoc& seed, const RecordCallback& on_record = {},
                            std::string_view fom_formula = "gbw_cl_over_idc");

}  // namespace sizer
