#include <cmath>

#include <fmt/format.h>

#include "sizer/strategy.hpp"

namespace sizer {

std::string_view to_string(Phase p) { return p == Phase::tt ? "tt" : "corner"; }

bool IterationContext::is_unmet(Metric m) const {
  for (const auto& u : unmet) {
    if (u.metric == m) return true;
  }
  return false;
}

std::optional<UnmetSpec> IterationContext::worst_unmet(Metric m) const {
  std::optional<UnmetSpec> worst;
  for (const auto& u : unmet) {
    if (u.metric == m && (!worst || u.margin_frac < worst->margin_frac)) worst = u;
  }
  return worst;
}

std::vector<UnmetSpec> collect_unmet(const std::map<ProcessCorner, EvalReport>& reports) {
  std::vector<UnmetSpec> out;
  for (auto m : kAllMetrics) {
    for (auto c : kAllCorners) {
      const auto it = reports.find(c);
      if (it == reports.end()) continue;
      const auto& e = it->second[m];
      if (!e.pass) out.push_back({m, c, e.value, e.target, e.margin_frac});
    }
  }
  return out;
}

namespace {

constexpr std::string_view kCircuitBrief =
    R"(Two-stage Miller-compensated operational amplifier, 1.8 V supply, 10 uA reference current.
Roles:
  M1, M2  nmos input differential pair
  M3, M4  pmos current-mirror load of the first stage
  M5      nmos tail current source, mirrors the reference with ratio m
  M6      nmos second-stage current source, mirrors the reference with ratio m
  M7      pmos common-source second stage
  C1      Miller compensation capacitor Cc (first-stage output to out)
  CL      load capacitor, fixed
Governing relations (small-signal):
  Av  = gm1/(gds2+gds4) * gm7/(gds6+gds7)
  GBW = gm1/(2*pi*Cc)
  fp2 = gm7/(2*pi*CL),  fz = gm7/(2*pi*Cc)  (right-half-plane zero)
  PM  = 90 - atan(GBW/fp2) - atan(GBW/fz)
  SR  = min(I5/Cc, I6/CL)
  Idc = Iref + I5 + I6,  I5 = m5*Iref,  I6 = m6*Iref
Units: W and L in metres with SPICE suffixes (3u = 3 um), m is an integer finger count.)";

constexpr std::string_view kHeuristics =
    R"(- Gain rises with the channel length of M1-M4 (lower gds) and with lower first-stage current.
- GBW follows gm1 and Cc: widen M1/M2, add tail current, or shrink Cc.
- Phase margin needs the output pole gm7/CL at three times GBW or more; raise gm7 (M7 width or fingers) or Cc.
- Slew rate is bounded by the tail current into Cc and the second-stage current into CL.
- Every current increase is paid for in Idc; keep a margin on every target, not only the failing one.
- Change few parameters per step and state the expected effect of each change.)";

std::string section(std::string_view title, std::string_view body) {
  return fmt::format("## {}\n{}\n\n", title, body);
}

std::string params_block(const CircuitParams& p, const NameMap& names = NameMap{}) {
  std::string out;
  for (int n = 1; n <= static_cast<int>(kNumRoles); ++n) {
    const auto& d = p.M(n);
    out += fmt::format("{:<3} W={:<8} L={:<8} m={}\n", names.devices[n - 1], format_um(d.w),
                       format_um(d.l), d.m);
  }
  out += fmt::format("{} = {}\n{} = {}", names.c1, format_eng(p.c1), names.cl, format_eng(p.cl));
  return out;
}

std::string unmet_block(const std::vector<UnmetSpec>& unmet, const SpecSet& specs) {
  if (unmet.empty()) return "none";
  std::string out;
  for (const auto& u : unmet) {
    const auto dir = specs[u.metric].direction == Direction::at_least ? ">" : "<";
    out += fmt::format("- {} at {}: {} vs {} {} (margin {:+.1f}%)\n", to_string(u.metric),
                       to_string(u.corner), format_metric(u.metric, u.value), dir,
                       format_metric(u.metric, u.target), u.margin_frac * 100.0);
  }
  out.pop_back();
  return out;
}

std::string knowledge_sections(const StaticKnowledge& k, KnowledgeMode mode) {
  std::string out = section("Circuit", k.circuit_brief);
  out += section("Design Targets", k.spec_table);
  if (mode == KnowledgeMode::with_gmid) out += section("gm/Id Lookup Tables", k.lut_digest);
  out += section("Design Heuristics", k.heuristics);
  return out;
}

}  // namespace

std::string format_spec_table(const SpecSet& specs) {
  std::string out = fmt::format("{:<6} {:<4} {:>12} {:>8} {:>14}\n", "Metric", "Dir", "Typical",
                                "Factor", "Corner target");
  for (auto m : kAllMetrics) {
    const auto& it = specs[m];
    out += fmt::format("{:<6} {:<4} {:>12} {:>8.2f} {:>14}\n", to_string(m),
                       it.direction == Direction::at_least ? ">" : "<",
                       format_metric(m, it.tt_target), it.corner_factor,
                       format_metric(m, it.corner_target()));
  }
  out.pop_back();
  return out;
}

std::vector<double> digest_lengths(const LutGrid& grid) {
  const auto n = grid.l_axis.size();
  std::vector<double> out;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto idx = static_cast<std::size_t>(std::lround(static_cast<double>(k * (n - 1)) / 3.0));
    if (out.empty() || out.back() != grid.l_axis[idx]) out.push_back(grid.l_axis[idx]);
  }
  return out;
}

std::string lut_digest(const LutGrid& grid) {
  std::string out = fmt::format("### {} {} (Vds = {} V, per um of width)\n", to_string(grid.kind),
                                to_string(grid.corner), grid.vds);
  out += fmt::format("{:>6} {:>6} {:>7} {:>11} {:>11} {:>11}\n", "L[um]", "gm/Id", "Vov[V]",
                     "Id/W[A]", "gm/W[S]", "gds/W[S]");
  for (double l : digest_lengths(grid)) {
    for (double r : kDigestRatios) {
      const auto [lo, hi] = ratio_range(grid, l);
      if (r < lo || r > hi) {
        out += fmt::format("{:>6} {:>6.1f} {:>7} {:>11} {:>11} {:>11}\n", l, r, "-", "-", "-", "-");
        continue;
      }
      const double vgs = invert_gm_over_id(grid, l, r);
      const auto op = query(grid, l, vgs);
      out += fmt::format("{:>6} {:>6.1f} {:>7.3f} {:>11.4e} {:>11.4e} {:>11.4e}\n", l, r, op.vov,
                         op.id_per_w, op.gm_per_w, op.gds_per_w);
    }
  }
  return out;
}

std::string lut_digest(const LutSet& luts, ProcessCorner corner) {
  std::string out = lut_digest(luts.get(DeviceKind::nmos, corner));
  out += "\n";
  out += lut_digest(luts.get(DeviceKind::pmos, corner));
  out.pop_back();
  return out;
}

StaticKnowledge make_static_knowledge(const LutSet& luts, const SpecSet& specs) {
  StaticKnowledge k;
  k.circuit_brief = std::string(kCircuitBrief);
  k.heuristics = std::string(kHeuristics);
  k.lut_digest = lut_digest(luts);
  k.spec_table = format_spec_table(specs);
  return k;
}

std::string response_format_contract() {
  return R"(Reply with three headed sections, in this order:
Observation:
Thinking Process:
Action:
The Action section ends with a fenced block whose first line is ACTIONS, then one entry per line:
  <name>.<W|L|m> = <eng-number|int>    e.g. M1.W = 3u   M7.m = 8
  <capname> = <eng-number>             e.g. C1 = 1.2p
or the single token DONE when every target is met. Example:
```
ACTIONS
C1 = 1.2p
M1.W = 3u
M2.W = 3u
```
Bounds: W 0.3u..500u, L 0.15u..5u, m 1..64, capacitors 0.1p..20p. Only M1-M7 and C1 may change.)";
}

std::string build_initial_prompt(const StaticKnowledge& knowledge, const SpecSet& specs,
                                 KnowledgeMode mode) {
  (void)specs;
  std::string out = "# Two-stage op-amp sizing: initial design\n\n";
  out += knowledge_sections(knowledge, mode);
  out += section("Response Format", response_format_contract());
  out += section("Task",
                 "Act first as a theoretical calculator: from the targets and relations above, "
                 "derive a complete initial parameter set. Give W, L and m for every device "
                 "M1-M7 and the value of C1.");
  return out;
}

std::string build_iteration_prompt(const StaticKnowledge& knowledge, const IterationContext& ctx,
                                   KnowledgeMode mode) {
  std::string out = fmt::format("# Two-stage op-amp sizing: iteration {} ({} phase)\n\n",
                                ctx.iteration, to_string(ctx.phase));
  out += knowledge_sections(knowledge, mode);
  out += section("Current Parameters", params_block(ctx.params));
  if (!ctx.netlist_text.empty()) {
    out += section("Current Netlist", fmt::format("```\n{}```", ctx.netlist_text));
  }
  std::string results;
  for (const auto& [corner, report] : ctx.reports) {
    results += fmt::format("### {} ({} targets)\n{}\n", to_string(corner),
                           ctx.phase == Phase::tt ? "typical" : "corner",
                           format_report_table(report));
  }
  if (results.empty()) results = "none\n";
  results.pop_back();
  out += section("Simulation Results", results);
  out += section("Unmet Specifications", unmet_block(ctx.unmet, ctx.specs));
  out += section("Optimization History", ctx.history_summary.empty() ? "none" : ctx.history_summary);
  out += section("Response Format", response_format_contract());
  out += section("Task",
                 "Follow the Output Visibility principle: show your Observation of the results, "
                 "your Thinking Process with the numbers behind each change, and the Action. "
                 "Reply DONE only when nothing is unmet.");
  return out;
}

}  // namespace sizer
