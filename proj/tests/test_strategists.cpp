#include <functional>

#include <gtest/gtest.h>

#include "sizer/strategy.hpp"
#include "support.hpp"

using namespace sizer;
using testing_support::default_luts;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::config;
}

IterationContext evaluate(const CircuitParams& p, Phase phase = Phase::tt) {
  IterationContext ctx;
  ctx.phase = phase;
  ctx.params = p;
  std::vector<ProcessCorner> corners{ProcessCorner::TT};
  if (phase == Phase::corner) corners.assign(kAllCorners.begin(), kAllCorners.end());
  for (auto c : corners) {
    ctx.metrics[c] = analytic_evaluate(p, default_luts(), c);
    ctx.reports[c] =
        evaluate_specs(ctx.metrics[c], ctx.specs, phase == Phase::tt ? EvalMode::tt : EvalMode::corner);
  }
  ctx.unmet = collect_unmet(ctx.reports);
  return ctx;
}

IterationContext only_unmet(const CircuitParams& p, std::vector<Metric> metrics) {
  auto ctx = evaluate(p);
  ctx.unmet.clear();
  for (auto m : metrics) {
    const auto& e = ctx.reports[ProcessCorner::TT][m];
    ctx.unmet.push_back({m, ProcessCorner::TT, e.value, e.target, -0.05});
  }
  return ctx;
}

CircuitParams iter1() { return extract_params(testing_support::netlist("iter1.cir")); }

CircuitParams applied(const CircuitParams& p, const ActionPlan& plan) {
  return extract_params(apply_patches(parse_netlist(synthesize_netlist(p)), plan.patches));
}

}  // namespace

TEST(Rules, FirstMatchingRuleFires) {
  const auto p = iter1();
  auto plan = rule_based_step(only_unmet(p, {Metric::GAIN, Metric::PM}));
  ASSERT_EQ(plan.patches.size(), 1u);
  EXPECT_EQ(plan.patches[0], ParamPatch::cap("C1", "1.1p"));

  plan = rule_based_step(only_unmet(p, {Metric::GAIN, Metric::GBW}));
  ASSERT_EQ(plan.patches.size(), 2u);
  EXPECT_EQ(plan.patches[0], ParamPatch::w("M1", "1.2u"));
  EXPECT_EQ(plan.patches[1], ParamPatch::w("M2", "1.2u"));

  plan = rule_based_step(only_unmet(p, {Metric::GAIN}));
  ASSERT_EQ(plan.patches.size(), 4u);
  EXPECT_EQ(plan.patches[3], ParamPatch::l("M4", "0.27u"));

  plan = rule_based_step(only_unmet(p, {Metric::SR}));
  EXPECT_EQ(plan.patches.at(0), ParamPatch::m("M5", 3));
  plan = rule_based_step(only_unmet(p, {Metric::IDC}));
  EXPECT_EQ(plan.patches.at(0), ParamPatch::m("M5", 1));
}

TEST(Rules, LengthIsCappedAndDoneWhenAllMet) {
  auto p = extract_params(testing_support::netlist("gain_limited.cir"));
  const auto plan = rule_based_step(only_unmet(p, {Metric::GAIN}));
  for (const auto& patch : plan.patches) EXPECT_EQ(patch.value.rendered, "2u");
  EXPECT_EQ(applied(p, plan), p);

  const auto done = rule_based_step(only_unmet(p, {}));
  EXPECT_TRUE(done.declared_done);
  EXPECT_TRUE(done.patches.empty());
}

TEST(Gmid, GbwDeficitIsClosedInOneStep) {
  const auto p = iter1();
  const auto ctx = only_unmet(p, {Metric::GBW});
  const auto plan = gmid_step(ctx, default_luts());
  ASSERT_FALSE(plan.patches.empty());
  const auto q = applied(p, plan);
  EXPECT_EQ(q.M(1).w, q.M(2).w);
  const auto m = analytic_evaluate(q, default_luts(), ProcessCorner::TT);
  EXPECT_GE(m.gbw_hz, 20e6);
  // gm1 = 2*pi*Cc*GBW for the single-pole unity crossing, with the 10% design margin
  EXPECT_NEAR(m.gbw_hz, 20e6 * 1.1, 20e6 * 1.1 * 0.03);
}

TEST(Gmid, PhaseMarginDeficitRaisesCcAndOutputStage) {
  auto p = iter1();
  p.c1 = 0.5e-12;
  auto ctx = evaluate(p);
  ASSERT_TRUE(ctx.is_unmet(Metric::PM));
  ASSERT_GT(ctx.specs[Metric::PM].tt_target - ctx.metrics[ProcessCorner::TT].pm_deg, 5.0);
  const auto plan = gmid_step(ctx, default_luts());
  const auto q = applied(p, plan);
  EXPECT_GT(q.c1, p.c1);
  EXPECT_LE(q.c1, p.c1 * 1.25 + 1e-18);
  EXPECT_GE(q.M(7).m * q.M(7).w, p.M(7).m * p.M(7).w);
  const auto m = analytic_evaluate(q, default_luts(), ProcessCorner::TT);
  EXPECT_GT(m.pm_deg, ctx.metrics[ProcessCorner::TT].pm_deg);
}

TEST(Gmid, RespectsBoundsAndNeedsResults) {
  const auto ctx = evaluate(iter1());
  const auto plan = gmid_step(ctx, default_luts());
  const PlanBounds b;
  for (const auto& patch : plan.patches) EXPECT_NO_THROW(check_bounds(patch, b)) << render_patch(patch);
  IterationContext fresh;
  fresh.params = iter1();
  EXPECT_EQ(code_of([&] { gmid_step(fresh, default_luts()); }), ErrorCode::config);
  GmidStrategist s(default_luts());
  EXPECT_EQ(s.propose(fresh).plan.patches, restate_params(fresh.params));
  EXPECT_TRUE(gmid_step(only_unmet(iter1(), {}), default_luts()).declared_done);
}

TEST(Replay, ScriptSteps) {
  const auto script = parse_replay_script(testing_support::read_data("table3.replay"));
  ASSERT_EQ(script.size(), 6u);
  const auto third = replay_step(script, 3);
  ASSERT_EQ(third.patches.size(), 3u);
  EXPECT_EQ(third.patches[0], ParamPatch::cap("C1", "1.2p"));
  EXPECT_EQ(third.patches[2], ParamPatch::w("M2", "3u"));
  EXPECT_TRUE(replay_step(script, 7).declared_done);
  IterationContext ctx;
  ctx.iteration = 6;
  EXPECT_EQ(ReplayStrategist(script).propose(ctx).plan.patches,
            (std::vector{ParamPatch::cap("C1", "0.9p")}));
}

TEST(Replay, ScriptErrors) {
  EXPECT_EQ(code_of([] { parse_replay_script("C1 = 1p\n"); }), ErrorCode::format);
  EXPECT_EQ(code_of([] { parse_replay_script("@iter 2\nC1 = 1p\n"); }), ErrorCode::format);
  EXPECT_EQ(code_of([] { parse_replay_script("@iter 1\n@iter 2\nC1 = 1p\n"); }), ErrorCode::format);
  EXPECT_EQ(code_of([] { parse_replay_script("@iter 1\nC1 == 1p\n"); }),
            ErrorCode::unparseable_assignment);
  EXPECT_EQ(code_of([] { parse_replay_script("@iter 1\nM1.m = 99\n"); }), ErrorCode::bounds_violation);
}
