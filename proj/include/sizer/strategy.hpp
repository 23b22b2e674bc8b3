#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sizer/backends.hpp"
#include "sizer/gmid_lut.hpp"
#include "sizer/llm_client.hpp"
#include "sizer/netlist.hpp"
#include "sizer/specs.hpp"

namespace sizer {

enum class Phase { tt, corner };
std::string_view to_string(Phase p);

/// Long-lived prompt material, fixed for a run.
struct StaticKnowledge {
  std::string circuit_brief;
  std::string heuristics;
  std::string lut_digest;
  std::string spec_table;
};

/// Whether the gm/Id digest is shown to the strategist (ablation switch).
enum class KnowledgeMode { with_gmid, without_gmid };

std::string format_spec_table(const SpecSet& specs);

/// Fixed-width gm/Id excerpt for one table: for each of four lengths and
/// gm/Id in {5, 8, 10, 12, 15, 18, 22, 26}, the inverted operating point.
std::string lut_digest(const LutGrid& grid);
/// Both polarities at `corner`.
std::string lut_digest(const LutSet& luts, ProcessCorner corner = ProcessCorner::TT);

inline constexpr std::array<double, 8> kDigestRatios = {5, 8, 10, 12, 15, 18, 22, 26};
std::vector<double> digest_lengths(const LutGrid& grid);

StaticKnowledge make_static_knowledge(const LutSet& luts, const SpecSet& specs);

struct UnmetSpec {
  Metric metric = Metric::GAIN;
  ProcessCorner corner = ProcessCorner::TT;
  double value = 0.0;
  double target = 0.0;
  double margin_frac = 0.0;
};

/// Dynamic ("short-term") state handed to a strategist each turn.
struct IterationContext {
  int iteration = 1;
  Phase phase = Phase::tt;
  CircuitParams params;
  SpecSet specs = SpecSet::defaults();
  std::map<ProcessCorner, PerfMetrics> metrics;  // last evaluation; empty on turn 1
  std::map<ProcessCorner, EvalReport> reports;
  std::vector<UnmetSpec> unmet;
  std::string history_summary = "none";
  std::string netlist_text;

  bool has_results() const { return !metrics.empty(); }
  bool is_unmet(Metric m) const;
  /// Unmet entry with the most negative margin for `m`.
  std::optional<UnmetSpec> worst_unmet(Metric m) const;
};

/// Unmet list from per-corner reports, ordered by metric then corner.
std::vector<UnmetSpec> collect_unmet(const std::map<ProcessCorner, EvalReport>& reports);

struct ActionPlan {
  std::string observation;
  std::string thinking;
  std::vector<ParamPatch> patches;
  bool declared_done = false;

  friend bool operator==(const ActionPlan&, const ActionPlan&) = default;
};

struct PlanBounds {
  double w_min_um = 0.3, w_max_um = 500.0;
  double l_min_um = 0.15, l_max_um = 5.0;
  int m_min = 1, m_max = 64;
  double c_min_pf = 0.1, c_max_pf = 20.0;
};

/// Throws Error{bounds_violation} naming the violated limit.
void check_bounds(const ParamPatch& patch, const PlanBounds& bounds);

/// Response-format contract quoted in every prompt.
std::string response_format_contract();

std::string build_initial_prompt(const StaticKnowledge& knowledge, const SpecSet& specs,
                                 KnowledgeMode mode = KnowledgeMode::with_gmid);
std::string build_iteration_prompt(const StaticKnowledge& knowledge, const IterationContext& ctx,
                                   KnowledgeMode mode = KnowledgeMode::with_gmid);

/// Text following the response contract; parse_response(render_plan(p)) == p.
std::string render_plan(const ActionPlan& plan);
std::string render_patch(const ParamPatch& patch);

struct ParseOptions {
  PlanBounds bounds;
  std::optional<std::set<std::string>> devices;     // uppercase names
  std::optional<std::set<std::string>> capacitors;  // uppercase names
};

ParseOptions role_parse_options(const NameMap& names = NameMap{}, PlanBounds bounds = {});

/// Throws Error{missing_action_block}, Error{unparseable_assignment} (with line
/// number), Error{bounds_violation}, Error{unknown_target}.
ActionPlan parse_response(std::string_view text, const ParseOptions& options = {});

/// One `name.W = v` / `cap = v` line. `line_no` is used in error messages.
ParamPatch parse_assignment(std::string_view line, int line_no, const ParseOptions& options);

// ----------------------------------------------------------------------------
// Strategists

struct StrategistTurn {
  ActionPlan plan;
  std::string prompt;  // empty for non-LLM strategists
  std::string reply;
  std::string raw;  // wire-level request/response log, JSON
  int attempts = 0;
};

class Strategist {
 public:
  virtual ~Strategist() = default;
  virtual std::string name() const = 0;
  virtual StrategistTurn propose(const IterationContext& ctx) = 0;
};

/// Thresholds of the rigid rule list.
struct RuleConfig {
  double cc_factor = 1.1;
  double w_factor = 1.2;
  double l_factor = 1.5;
  double l_cap_um = 2.0;
  PlanBounds bounds;
  NameMap names;
};

/// First matching rule fires: PM -> Cc*1.1, GBW -> W(M1,M2)*1.2,
/// GAIN -> L(M1..M4)*1.5 (capped), SR -> m(M5)+1, IDC -> m(M5)-1.
ActionPlan rule_based_step(const IterationContext& ctx, const RuleConfig& config = {});

struct GmidConfig {
  double gm1_margin = 1.1;      // over the GBW target
  double p2_factor = 3.0;       // second pole at >= 3x GBW
  double pm_cc_trigger_deg = 5.0;
  double budget_margin = 1.05;  // projected GBW/SR kept this far above target
  double sr_margin = 1.2;
  double pm_margin_deg = 2.0;   // extra PM aimed for when sizing M7
  double headroom_v = 0.1;      // keep solved Vgs this far inside the LUT hull
  double cc_max_step = 1.25;    // largest single Cc increase
  double ratio_ceiling = 0.85;  // fraction of the max gm/Id before adding current
  double ratio_aim = 0.7;       // fraction of the max gm/Id aimed for when adding current
  BiasConfig bias;
  PlanBounds bounds;
  NameMap names;
};

/// Deterministic gm/Id sizing step. Throws sizing errors from the LUT layer.
ActionPlan gmid_step(const IterationContext& ctx, const LutSet& luts,
                     const GmidConfig& config = {});

using ReplayScript = std::vector<std::vector<ParamPatch>>;

/// `@iter N` headers followed by assignment lines.
ReplayScript parse_replay_script(std::string_view text);
ActionPlan replay_step(const ReplayScript& script, int iteration);

class RuleStrategist final : public Strategist {
 public:
  explicit RuleStrategist(RuleConfig config = {}) : config_(std::move(config)) {}
  std::string name() const override { return "rules"; }
  StrategistTurn propose(const IterationContext& ctx) override;

 private:
  RuleConfig config_;
};

class GmidStrategist final : public Strategist {
 public:
  GmidStrategist(const LutSet& luts, GmidConfig config = {})
      : luts_(luts), config_(std::move(config)) {}
  std::string name() const override { return "gmid"; }
  StrategistTurn propose(const IterationContext& ctx) override;

 private:
  const LutSet& luts_;
  GmidConfig config_;
};

class ReplayStrategist final : public Strategist {
 public:
  explicit ReplayStrategist(ReplayScript script) : script_(std::move(script)) {}
  std::string name() const override { return "replay"; }
  StrategistTurn propose(const IterationContext& ctx) override;

 private:
  ReplayScript script_;
};

class LlmStrategist final : public Strategist {
 public:
  LlmStrategist(LlmEndpoint endpoint, std::shared_ptr<ChatTransport> transport,
                StaticKnowledge knowledge, KnowledgeMode mode, ParseOptions options = {})
      : endpoint_(std::move(endpoint)),
        transport_(std::move(transport)),
        knowledge_(std::move(knowledge)),
        mode_(mode),
        options_(std::move(options)) {}
  std::string name() const override {
    return mode_ == KnowledgeMode::with_gmid ? "llm" : "llm-no-gmid";
  }
  StrategistTurn propose(const IterationContext& ctx) override;

 private:
  LlmEndpoint endpoint_;
  std::shared_ptr<ChatTransport> transport_;
  StaticKnowledge knowledge_;
  KnowledgeMode mode_;
  ParseOptions options_;
};

}  // namespace sizer
