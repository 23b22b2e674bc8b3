#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "sizer/kv.hpp"
#include "sizer/strategy.hpp"

namespace sizer {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// k/1000 and k/1e15 style roundings: the quotient of two exact integers is
// the double nearest the decimal, so format_um/format_eng print it cleanly.
double round_um(double um) { return std::round(um * 1000.0) / 1000.0; }
double ceil_centi_um(double um) { return std::ceil(um * 100.0 - 1e-9) / 100.0; }
double round_fempto(double f) { return std::round(f * 1e15) / 1e15; }
double floor_centi_pico(double f) { return std::floor(f * 1e14 + 1e-9) / 1e14; }

ActionPlan seed_plan(const CircuitParams& params, const NameMap& names) {
  ActionPlan p;
  p.observation = "No simulation results yet.";
  p.thinking = "Adopt the seed sizing as the starting point and evaluate it.";
  p.patches = restate_params(params, names);
  return p;
}

double phase_target(const IterationContext& ctx, Metric m) {
  return ctx.phase == Phase::tt ? ctx.specs[m].tt_target : ctx.specs[m].corner_target();
}

// Corner at which metric `m` is worst among the evaluated ones.
ProcessCorner worst_corner(const IterationContext& ctx, Metric m) {
  if (auto u = ctx.worst_unmet(m)) return u->corner;
  if (ctx.metrics.empty()) return ProcessCorner::TT;
  return worst_case(ctx.metrics, ctx.specs)[static_cast<std::size_t>(m)].corner;
}

}  // namespace

// ----------------------------------------------------------------------------

ActionPlan rule_based_step(const IterationContext& ctx, const RuleConfig& cfg) {
  ActionPlan plan;
  const auto& n = cfg.names;
  const auto& p = ctx.params;
  if (ctx.unmet.empty()) {
    plan.observation = "All specifications are met.";
    plan.thinking = "No rule applies.";
    plan.declared_done = true;
    return plan;
  }
  auto describe = [&](Metric m) {
    const auto u = *ctx.worst_unmet(m);
    plan.observation = fmt::format("{} = {} at {} against {}.", to_string(m),
                                   format_metric(m, u.value), to_string(u.corner),
                                   format_metric(m, u.target));
  };
  if (ctx.is_unmet(Metric::PM)) {
    describe(Metric::PM);
    const double c = std::min(round_fempto(p.c1 * cfg.cc_factor), cfg.bounds.c_max_pf * 1e-12);
    plan.thinking = fmt::format("Rule PM: Cc = Cc * {}.", cfg.cc_factor);
    plan.patches.push_back(ParamPatch::cap(n.c1, format_eng(c)));
  } else if (ctx.is_unmet(Metric::GBW)) {
    describe(Metric::GBW);
    plan.thinking = fmt::format("Rule GBW: W(M1), W(M2) = W * {}.", cfg.w_factor);
    for (int i : {1, 2}) {
      const double w = std::min(round_um(p.M(i).w * cfg.w_factor), cfg.bounds.w_max_um);
      plan.patches.push_back(ParamPatch::w(n.devices[i - 1], format_um(w)));
    }
  } else if (ctx.is_unmet(Metric::GAIN)) {
    describe(Metric::GAIN);
    plan.thinking = fmt::format("Rule GAIN: L(M1..M4) = L * {}, capped at {} um.", cfg.l_factor,
                                cfg.l_cap_um);
    for (int i : {1, 2, 3, 4}) {
      const double l = std::min(round_um(p.M(i).l * cfg.l_factor), cfg.l_cap_um);
      plan.patches.push_back(ParamPatch::l(n.devices[i - 1], format_um(l)));
    }
  } else if (ctx.is_unmet(Metric::SR)) {
    describe(Metric::SR);
    plan.thinking = "Rule SR: m(M5) = m + 1.";
    plan.patches.push_back(ParamPatch::m(n.devices[4], std::min(p.M(5).m + 1, cfg.bounds.m_max)));
  } else {
    describe(Metric::IDC);
    plan.thinking = "Rule IDC: m(M5) = m - 1.";
    plan.patches.push_back(ParamPatch::m(n.devices[4], std::max(p.M(5).m - 1, 1)));
  }
  return plan;
}

StrategistTurn RuleStrategist::propose(const IterationContext& ctx) {
  StrategistTurn t;
  t.plan = ctx.has_results() ? rule_based_step(ctx, config_) : seed_plan(ctx.params, config_.names);
  t.reply = render_plan(t.plan);
  return t;
}

// ----------------------------------------------------------------------------

namespace {

double pm_of(double gbw, double gm7, double cc, double cl) {
  return 90.0 - std::atan(kTwoPi * gbw * cl / gm7) * kRadToDeg -
         std::atan(kTwoPi * gbw * cc / gm7) * kRadToDeg;
}

// Smallest gm7 reaching `pm_goal`; PM rises monotonically with gm7.
double gm7_for_pm(double gbw, double cc, double cl, double pm_goal) {
  double lo = 1e-9, hi = 1.0;
  if (pm_of(gbw, hi, cc, cl) < pm_goal) return hi;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = std::sqrt(lo * hi);
    (pm_of(gbw, mid, cc, cl) < pm_goal ? lo : hi) = mid;
  }
  return hi;
}

std::optional<double> next_axis_step(const std::vector<double>& axis, double l) {
  for (double v : axis) {
    if (v > l * (1.0 + 1e-9)) return v;
  }
  return std::nullopt;
}

}  // namespace

ActionPlan gmid_step(const IterationContext& ctx, const LutSet& luts, const GmidConfig& cfg) {
  ActionPlan plan;
  if (!ctx.has_results()) {
    throw Error(ErrorCode::config, "gm/Id step needs evaluated metrics");
  }
  std::vector<std::string> obs, steps;
  for (const auto& u : ctx.unmet) {
    obs.push_back(fmt::format("{} at {} is {} against {} ({:+.1f}%).", to_string(u.metric),
                              to_string(u.corner), format_metric(u.metric, u.value),
                              format_metric(u.metric, u.target), u.margin_frac * 100.0));
  }
  if (ctx.unmet.empty()) {
    plan.observation = "All specifications are met.";
    plan.thinking = "Nothing to resize.";
    plan.declared_done = true;
    return plan;
  }

  const double i_ref = cfg.bias.i_ref;
  const auto& b = cfg.bounds;
  CircuitParams q = ctx.params;

  // Currents first: they set the densities every later lookup uses.
  if (auto u = ctx.worst_unmet(Metric::SR)) {
    const double sr = u->target * 1e6;  // V/s
    const int m5 = static_cast<int>(std::ceil(sr * cfg.sr_margin * q.c1 / i_ref - 1e-9));
    if (m5 > q.M(5).m) {
      steps.push_back(fmt::format("SR: tail current for {} V/us into Cc = {} needs m(M5) = {}.",
                                  u->target, format_eng(q.c1), m5));
      q.M(5).m = std::min(m5, b.m_max);
    }
    if (i_ref * q.M(6).m / q.cl < sr) {
      const int m6 = static_cast<int>(std::ceil(sr * cfg.sr_margin * q.cl / i_ref - 1e-9));
      steps.push_back(fmt::format("SR: output stage slews CL too slowly, m(M6) = {}.", m6));
      q.M(6).m = std::min(std::max(m6, q.M(6).m), b.m_max);
    }
  }
  if (auto u = ctx.worst_unmet(Metric::IDC)) {
    const double budget = u->target / cfg.budget_margin;
    const double f = (budget - i_ref) / (i_ref * (q.M(5).m + q.M(6).m));
    q.M(5).m = std::max(1, static_cast<int>(std::floor(q.M(5).m * f)));
    q.M(6).m = std::max(1, static_cast<int>(std::floor(q.M(6).m * f)));
    steps.push_back(fmt::format("IDC: scale the mirror ratios by {:.3f}: m(M5) = {}, m(M6) = {}.",
                                f, q.M(5).m, q.M(6).m));
  }

  // Gain: one length step on the first stage.
  if (ctx.is_unmet(Metric::GAIN)) {
    const auto& axis = luts.get(DeviceKind::nmos, ProcessCorner::TT).l_axis;
    if (auto l = next_axis_step(axis, q.M(1).l)) {
      for (int i : {1, 2, 3, 4}) q.M(i).l = std::max(q.M(i).l, *l);
      steps.push_back(fmt::format("GAIN: lengthen M1-M4 to {} um to lower gds2 + gds4.", *l));
    } else if (auto l6 = next_axis_step(axis, q.M(6).l)) {
      q.M(6).l = *l6;
      steps.push_back(fmt::format("GAIN: first stage at maximum length; lengthen M6 to {} um.", *l6));
    }
  }

  // gm1: hit the GBW requirement, or hold the present gm1 across L/current moves.
  const ProcessCorner c_gbw = worst_corner(ctx, Metric::GBW);
  const auto bias0 = solve_bias(ctx.params, luts, c_gbw, cfg.bias);
  std::optional<double> gm1_req;
  if (ctx.is_unmet(Metric::GBW)) {
    gm1_req = kTwoPi * q.c1 * phase_target(ctx, Metric::GBW) * cfg.gm1_margin;
    steps.push_back(fmt::format("GBW: gm1 = 2*pi*Cc*GBW*{} = {:.4g} S at {}.", cfg.gm1_margin,
                                *gm1_req, to_string(c_gbw)));
  } else if (q.M(1).l != ctx.params.M(1).l || q.M(5).m != ctx.params.M(5).m) {
    gm1_req = bias0.gm[0];
  }
  double gm1_new = bias0.gm[0];
  if (gm1_req) {
    const auto& grid = luts.get(DeviceKind::nmos, c_gbw);
    const double l1 = q.M(1).l;
    const double hi = ratio_range(grid, l1).second;
    if (*gm1_req / (i_ref * q.M(5).m / 2.0) > cfg.ratio_ceiling * hi) {
      const int m5 = static_cast<int>(std::ceil(2.0 * *gm1_req / (cfg.ratio_aim * hi * i_ref)));
      q.M(5).m = std::min(std::max(m5, q.M(5).m), b.m_max);
      steps.push_back(fmt::format("gm1/Id above {:.0f}% of the {:.1f} 1/V limit: m(M5) = {}.",
                                  cfg.ratio_ceiling * 100, hi, q.M(5).m));
    }
    const double id = i_ref * q.M(5).m / 2.0;
    const double ratio = std::max(*gm1_req / id, ratio_range(grid, l1).first * 1.001);
    const auto s = size_for_gm(grid, l1, ratio * id, id, b.w_max_um * q.M(1).m);
    const double w = std::clamp(ceil_centi_um(s.w / q.M(1).m), b.w_min_um, b.w_max_um);
    q.M(1).w = q.M(2).w = w;
    gm1_new = s.achieved_gm;
    steps.push_back(fmt::format("M1/M2: gm/Id = {:.2f} 1/V at L = {} um gives W = {} um.",
                                ratio, l1, w));
  }

  // Phase margin: Cc budget first, then the output pole.
  if (auto u = ctx.worst_unmet(Metric::PM)) {
    const ProcessCorner c_pm = u->corner;
    const double deficit = u->target - u->value;
    if (c_pm != c_gbw) gm1_new = solve_bias(q, luts, c_pm, cfg.bias).gm[0];
    if (deficit > cfg.pm_cc_trigger_deg) {
      const double gbw_t = phase_target(ctx, Metric::GBW);
      const double sr_t = phase_target(ctx, Metric::SR) * 1e6;
      const double f_gbw = gm1_new / (kTwoPi * q.c1) / (cfg.budget_margin * gbw_t);
      const double f_sr = i_ref * q.M(5).m / q.c1 / (cfg.budget_margin * sr_t);
      const double f = std::min({f_gbw, f_sr, cfg.cc_max_step});
      const double cc = std::min(floor_centi_pico(q.c1 * f), b.c_max_pf * 1e-12);
      if (cc > q.c1) {
        steps.push_back(fmt::format(
            "PM short by {:.1f} deg: Cc {} -> {} keeps projected GBW and SR {:.0f}% above target.",
            deficit, format_eng(q.c1), format_eng(cc), (cfg.budget_margin - 1.0) * 100));
        q.c1 = cc;
      }
    }
    const double gbw = gm1_new / (kTwoPi * q.c1);
    double gm7_req = std::max(cfg.p2_factor * kTwoPi * q.cl * gbw,
                              gm7_for_pm(gbw, q.c1, q.cl, u->target + cfg.pm_margin_deg));
    const auto& grid = luts.get(DeviceKind::pmos, c_pm);
    const double l7 = q.M(7).l;
    const auto [lo, hi] = ratio_range(grid, l7);
    if (gm7_req / (i_ref * q.M(6).m) > cfg.ratio_ceiling * hi) {
      const int m6 = static_cast<int>(std::ceil(gm7_req / (cfg.ratio_aim * hi * i_ref)));
      q.M(6).m = std::min(std::max(m6, q.M(6).m), b.m_max);
      steps.push_back(fmt::format("gm7/Id above {:.0f}% of the {:.1f} 1/V limit: m(M6) = {}.",
                                  cfg.ratio_ceiling * 100, hi, q.M(6).m));
    }
    const double i2 = i_ref * q.M(6).m;
    gm7_req = std::max(gm7_req, lo * 1.001 * i2);
    const auto s = size_for_gm(grid, l7, gm7_req, i2, b.w_max_um * b.m_max);
    int m7 = static_cast<int>(std::ceil(s.w / q.M(7).w - 1e-9));
    if (m7 <= b.m_max) {
      q.M(7).m = std::max(m7, b.m_min);
    } else {
      q.M(7).m = b.m_max;
      q.M(7).w = std::clamp(ceil_centi_um(s.w / b.m_max), b.w_min_um, b.w_max_um);
    }
    steps.push_back(fmt::format(
        "PM: f_p2 >= {}x GBW ({:.2f} MHz) needs gm7 = {:.4g} S at {}: M7 W = {} um x{}.",
        cfg.p2_factor, gbw * 1e-6, gm7_req, to_string(c_pm), q.M(7).w, q.M(7).m));
  }

  // Keep every device biased inside the table hull at every corner.
  for (auto corner : kAllCorners) {
    if (!luts.contains(DeviceKind::nmos, corner) || !luts.contains(DeviceKind::pmos, corner)) continue;
    const double i_tail = i_ref * q.M(5).m, i2 = i_ref * q.M(6).m;
    const std::array<double, kNumRoles> cur = {i_tail / 2, i_tail / 2, i_tail / 2, i_tail / 2,
                                               i_tail, i2, i2};
    for (std::size_t r = 0; r < kNumRoles; ++r) {
      auto& d = q.dev[r];
      const auto& grid = luts.get(role_kind(r), corner);
      const double vgs_cap = grid.vgs_axis.back() - cfg.headroom_v;
      const double max_density = query(grid, d.l, vgs_cap).id_per_w;
      if (cur[r] / (d.w * d.m) > max_density) {
        const double w = std::clamp(ceil_centi_um(cur[r] / (d.m * max_density)), b.w_min_um,
                                    b.w_max_um);
        steps.push_back(fmt::format("Headroom at {}: widen {} to {} um.", to_string(corner),
                                    cfg.names.devices[r], w));
        d.w = w;
      }
    }
  }

  plan.patches = diff_params(ctx.params, q, cfg.names);
  if (plan.patches.empty()) {
    steps.push_back("No table-feasible move remains; holding the present sizing.");
    plan.patches.push_back(ParamPatch::cap(cfg.names.c1, format_eng(q.c1)));
  }
  plan.observation = fmt::format("{}", fmt::join(obs, "\n"));
  plan.thinking = fmt::format("{}", fmt::join(steps, "\n"));
  return plan;
}

StrategistTurn GmidStrategist::propose(const IterationContext& ctx) {
  StrategistTurn t;
  t.plan = ctx.has_results() ? gmid_step(ctx, luts_, config_) : seed_plan(ctx.params, config_.names);
  t.reply = render_plan(t.plan);
  return t;
}

// ----------------------------------------------------------------------------

ReplayScript parse_replay_script(std::string_view text) {
  ReplayScript script;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  const ParseOptions opts;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = kv::trim(line);
    if (const auto hash = t.find('#'); hash != std::string_view::npos) t = kv::trim(t.substr(0, hash));
    if (t.empty()) continue;
    if (t.starts_with("@iter")) {
      const auto num = kv::trim(t.substr(5));
      const int n = static_cast<int>(kv::parse_double(num, "iteration number"));
      if (n != static_cast<int>(script.size()) + 1) {
        throw Error(ErrorCode::format, fmt::format("line {}: expected @iter {}, got '{}'", line_no,
                                                   script.size() + 1, num));
      }
      script.emplace_back();
      continue;
    }
    if (script.empty()) {
      throw Error(ErrorCode::format, fmt::format("line {}: assignment before the first @iter", line_no));
    }
    script.back().push_back(parse_assignment(t, line_no, opts));
  }
  for (std::size_t i = 0; i < script.size(); ++i) {
    if (script[i].empty()) throw Error(ErrorCode::format, fmt::format("@iter {} is empty", i + 1));
  }
  return script;
}

ActionPlan replay_step(const ReplayScript& script, int iteration) {
  ActionPlan p;
  if (iteration < 1 || static_cast<std::size_t>(iteration) > script.size()) {
    p.observation = fmt::format("Script exhausted after {} steps.", script.size());
    p.thinking = "Nothing left to replay.";
    p.declared_done = true;
    return p;
  }
  p.observation = fmt::format("Scripted step {} of {}.", iteration, script.size());
  p.thinking = "Apply the recorded parameter changes.";
  p.patches = script[static_cast<std::size_t>(iteration - 1)];
  return p;
}

StrategistTurn ReplayStrategist::propose(const IterationContext& ctx) {
  StrategistTurn t;
  t.plan = replay_step(script_, ctx.iteration);
  t.reply = render_plan(t.plan);
  return t;
}

// ----------------------------------------------------------------------------

StrategistTurn LlmStrategist::propose(const IterationContext& ctx) {
  StrategistTurn t;
  t.prompt = ctx.has_results() ? build_iteration_prompt(knowledge_, ctx, mode_)
                               : build_initial_prompt(knowledge_, ctx.specs, mode_);
  const auto reply = llm_step(endpoint_, t.prompt, *transport_);
  t.reply = reply.text;
  t.attempts = reply.attempts();
  nlohmann::json raw;
  raw["request"] = nlohmann::json::parse(reply.request);
  raw["exchanges"] = nlohmann::json::array();
  for (const auto& ex : reply.exchanges) {
    raw["exchanges"].push_back(
        {{"attempt", ex.attempt}, {"status", ex.status}, {"error", ex.error}, {"response", ex.response}});
  }
  t.raw = raw.dump(2);
  t.plan = parse_response(t.reply, options_);
  return t;
}

}  // namespace sizer
