#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "sizer/strategy.hpp"

using namespace sizer;

namespace {

const ParseOptions kRoles = role_parse_options();

Error error_of(const std::string& text) {
  try {
    parse_response(text, kRoles);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "parsed without error:\n" << text;
  return Error(ErrorCode::config, "");
}

std::string reply_with(const std::string& block) {
  return "Observation:\nx\n\nThinking Process:\ny\n\nAction:\n```\nACTIONS\n" + block + "```\n";
}

}  // namespace

TEST(Response, MarkdownReply) {
  const std::string text = R"(**Observation:** Gain is 52.19 dB against 60 dB; GBW 17.58 MHz; PM 58.49 deg.
The first stage is short-channel.

**Thinking Process:**
1. Lengthen M1-M4 to raise ro.
2. Widen M1/M2 to hold gm1.

**Action:**
```ACTIONS
M1.L = 0.5u
M2.L = 0.5u
M1.W = 4u
M2.W = 4u
M7.m = 6
C1 = 1.2p
```
Trailing remarks are ignored.
)";
  const auto plan = parse_response(text, kRoles);
  EXPECT_EQ(plan.observation,
            "Gain is 52.19 dB against 60 dB; GBW 17.58 MHz; PM 58.49 deg.\nThe first stage is short-channel.");
  EXPECT_EQ(plan.thinking, "1. Lengthen M1-M4 to raise ro.\n2. Widen M1/M2 to hold gm1.");
  ASSERT_EQ(plan.patches.size(), 6u);
  EXPECT_EQ(plan.patches[0], ParamPatch::l("M1", "0.5u"));
  EXPECT_EQ(plan.patches[4], ParamPatch::m("M7", 6));
  EXPECT_EQ(plan.patches[5], ParamPatch::cap("C1", "1.2p"));
  EXPECT_FALSE(plan.declared_done);
}

TEST(Response, NumberedHeadersAndOtherFences) {
  const std::string text = "## 1. Observation\nok\n## 2. Thinking process\n```python\nprint(1)\n```\n"
                           "## 3. Action\n```\nACTIONS\n# keep M2 matched\nm2.w = 3u\nM7.M = 8\n```\n";
  const auto plan = parse_response(text, kRoles);
  EXPECT_EQ(plan.observation, "ok");
  ASSERT_EQ(plan.patches.size(), 2u);
  EXPECT_EQ(plan.patches[0].field, ParamField::W);
  EXPECT_EQ(plan.patches[1], ParamPatch::m("M7", 8));
}

TEST(Response, Done) {
  EXPECT_TRUE(parse_response(reply_with("DONE\n"), kRoles).declared_done);
  EXPECT_EQ(error_of(reply_with("DONE\nC1 = 1p\n")).code(), ErrorCode::unparseable_assignment);
}

TEST(Response, MissingOrEmptyBlock) {
  EXPECT_EQ(error_of("Observation:\nfine\nAction:\nC1 = 1p\n").code(), ErrorCode::missing_action_block);
  EXPECT_EQ(error_of("```\nC1 = 1p\n```\n").code(), ErrorCode::missing_action_block);
  EXPECT_EQ(error_of(reply_with("\n# nothing\n")).code(), ErrorCode::missing_action_block);
}

TEST(Response, AssignmentErrors) {
  const auto zero = error_of(reply_with("C1 = 1p\nM1.m = 0\n"));
  EXPECT_EQ(zero.code(), ErrorCode::bounds_violation);
  EXPECT_NE(std::string(zero.what()).find("line 11"), std::string::npos) << zero.what();
  EXPECT_NE(std::string(zero.what()).find("m limit"), std::string::npos) << zero.what();

  EXPECT_EQ(error_of(reply_with("M1.m = 2.5\n")).code(), ErrorCode::unparseable_assignment);
  EXPECT_EQ(error_of(reply_with("M1.X = 1u\n")).code(), ErrorCode::unparseable_assignment);
  EXPECT_EQ(error_of(reply_with("M1.W 1u\n")).code(), ErrorCode::unparseable_assignment);
  EXPECT_EQ(error_of(reply_with("M1.W = 1 u\n")).code(), ErrorCode::unparseable_assignment);
  EXPECT_EQ(error_of(reply_with("M1.W = big\n")).code(), ErrorCode::unparseable_assignment);
  EXPECT_EQ(error_of(reply_with("M9.W = 1u\n")).code(), ErrorCode::unknown_target);
  EXPECT_EQ(error_of(reply_with("CL = 1p\n")).code(), ErrorCode::unknown_target);
  EXPECT_EQ(error_of(reply_with("C1 = 50p\n")).code(), ErrorCode::bounds_violation);
  EXPECT_EQ(error_of(reply_with("M1.L = 0.1u\n")).code(), ErrorCode::bounds_violation);
  EXPECT_EQ(error_of(reply_with("M1.W = 600u\n")).code(), ErrorCode::bounds_violation);
  EXPECT_EQ(error_of(reply_with("M1.m = 65\n")).code(), ErrorCode::bounds_violation);
}

TEST(Response, UnrestrictedOptionsAcceptAnyName) {
  const auto plan = parse_response(reply_with("MX.W = 2u\nCC = 3p\n"));
  ASSERT_EQ(plan.patches.size(), 2u);
  EXPECT_EQ(plan.patches[0].target, "MX");
}

TEST(Response, RenderParseRoundTrip) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> dev(1, 7), kind(0, 3), count(1, 6), m(1, 64);
  std::uniform_int_distribution<int> w(3, 5000), l(15, 500), c(1, 200);
  for (int i = 0; i < 100; ++i) {
    ActionPlan plan;
    plan.observation = "obs " + std::to_string(i) + "\nsecond line";
    plan.thinking = "think " + std::to_string(i);
    if (i % 17 == 0) {
      plan.declared_done = true;
    } else {
      const int n = count(rng);
      for (int k = 0; k < n; ++k) {
        const auto name = "M" + std::to_string(dev(rng));
        switch (kind(rng)) {
          case 0: plan.patches.push_back(ParamPatch::w(name, format_um(w(rng) / 10.0))); break;
          case 1: plan.patches.push_back(ParamPatch::l(name, format_um(l(rng) / 100.0))); break;
          case 2: plan.patches.push_back(ParamPatch::m(name, m(rng))); break;
          default: plan.patches.push_back(ParamPatch::cap("C1", format_eng(c(rng) * 0.1e-12))); break;
        }
      }
    }
    EXPECT_EQ(parse_response(render_plan(plan), kRoles), plan) << render_plan(plan);
  }
}

TEST(Response, RenderedPatchForms) {
  EXPECT_EQ(render_patch(ParamPatch::cap("C1", "1.2p")), "C1 = 1.2p");
  EXPECT_EQ(render_patch(ParamPatch::w("M1", "3u")), "M1.W = 3u");
  EXPECT_EQ(render_patch(ParamPatch::m("M7", 8)), "M7.m = 8");
}
