#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "sizer/specs.hpp"
#include "support.hpp"

using namespace sizer;

namespace {

PerfMetrics pm(double gain, double gbw_mhz, double pm_deg, double sr, double idc_ua) {
  return {gain, gbw_mhz * 1e6, pm_deg, sr, idc_ua * 1e-6};
}

std::map<ProcessCorner, PerfMetrics> recorded_corners(int iteration) {
  const auto j = nlohmann::json::parse(testing_support::read_data("table3_metrics.json"));
  std::map<ProcessCorner, PerfMetrics> out;
  for (const auto& e : j["entries"]) {
    if (e["iteration"] != iteration) continue;
    for (const auto& [name, m] : e["corners"].items()) {
      out[*parse_corner(name)] = {m["gain_db"], m["gbw_hz"], m["pm_deg"], m["sr_v_per_us"],
                                  m["idc_a"]};
    }
  }
  return out;
}

}  // namespace

TEST(Specs, DefaultDeratingReproducesCornerTargets) {
  const auto t = derated_targets(SpecSet::defaults());
  EXPECT_DOUBLE_EQ(t[0], 54.0);
  EXPECT_DOUBLE_EQ(t[1], 19.0e6);
  EXPECT_DOUBLE_EQ(t[2], 54.0);
  EXPECT_DOUBLE_EQ(t[3], 18.0);
  EXPECT_DOUBLE_EQ(t[4], 240.0e-6);
  EXPECT_EQ(format_metric(Metric::IDC, t[4]), "240.0 uA");
  EXPECT_EQ(format_metric(Metric::GBW, t[1]), "19.00 MHz");
}

TEST(Specs, FileMatchesDefaults) {
  const auto s = SpecSet::load(testing_support::data("specs.txt"));
  const auto d = SpecSet::defaults();
  for (auto m : kAllMetrics) {
    EXPECT_EQ(s[m].direction, d[m].direction);
    EXPECT_EQ(s[m].tt_target, d[m].tt_target);
    EXPECT_EQ(s[m].corner_factor, d[m].corner_factor);
  }
  const auto again = SpecSet::parse(s.serialize());
  for (auto m : kAllMetrics) EXPECT_EQ(again[m].tt_target, s[m].tt_target);
}

TEST(Specs, ParseErrors) {
  for (const char* bad : {"metric=FOO direction=at_least tt_target=1 corner_factor=1\n",
                          "metric=GAIN direction=sideways tt_target=1 corner_factor=1\n",
                          "metric=GAIN direction=at_least tt_target=1\n",
                          "metric=GAIN direction=at_least tt_target=1 corner_factor=0\n",
                          "metric=GAIN direction=at_least tt_target=1 corner_factor=1 extra=2\n"}) {
    try {
      SpecSet::parse(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::format) << bad;
    }
  }
}

TEST(Specs, TypicalResultPassesEverything) {
  const auto r = evaluate_specs(pm(62.40, 25.30, 65.80, 28.18, 116.4), SpecSet::defaults(), EvalMode::tt);
  EXPECT_TRUE(r.all_pass);
  EXPECT_NEAR(r[Metric::GAIN].margin_frac, 2.40 / 60.0, 1e-12);
  EXPECT_NEAR(r[Metric::IDC].margin_frac, (200.0 - 116.4) / 200.0, 1e-12);
}

TEST(Specs, FirstIterationFailsGainGbwPm) {
  const auto r = evaluate_specs(pm(52.19, 17.58, 58.49, 21.05, 105.2), SpecSet::defaults(), EvalMode::tt);
  EXPECT_FALSE(r.all_pass);
  std::set<Metric> failing;
  for (auto m : kAllMetrics) {
    if (!r[m].pass) failing.insert(m);
  }
  EXPECT_EQ(failing, (std::set<Metric>{Metric::GAIN, Metric::GBW, Metric::PM}));
  EXPECT_LT(r[Metric::GBW].margin_frac, 0.0);
  EXPECT_NE(format_report_table(r).find("FAIL"), std::string::npos);
}

TEST(Specs, WorstCaseOverRecordedCornersPassesDeratedTargets) {
  const auto corners = recorded_corners(6);
  ASSERT_EQ(corners.size(), 5u);
  const auto specs = SpecSet::defaults();
  const auto worst = worst_case(corners, specs);
  EXPECT_DOUBLE_EQ(worst[0].value, 59.90);
  EXPECT_EQ(worst[0].corner, ProcessCorner::FS);
  EXPECT_DOUBLE_EQ(worst[1].value, 19.79e6);
  EXPECT_EQ(worst[1].corner, ProcessCorner::SF);
  EXPECT_DOUBLE_EQ(worst[2].value, 63.00);
  EXPECT_EQ(worst[4].corner, ProcessCorner::SF);
  for (const auto& [c, m] : corners) {
    EXPECT_TRUE(evaluate_specs(m, specs, EvalMode::corner).all_pass) << to_string(c);
  }
  const auto gbw = evaluate_specs(corners.at(ProcessCorner::SF), specs, EvalMode::corner)[Metric::GBW];
  EXPECT_NEAR(gbw.margin_frac, (19.79 - 19.0) / 19.0, 0.001);
  EXPECT_NEAR(gbw.margin_frac, 0.042, 0.001);
}

TEST(Specs, WorstCaseTiesAndDirection) {
  std::map<ProcessCorner, PerfMetrics> m = {
      {ProcessCorner::SF, pm(60, 20, 60, 20, 150)},
      {ProcessCorner::FF, pm(60, 21, 61, 20, 150)},
      {ProcessCorner::TT, pm(61, 20, 60, 19, 100)},
  };
  const auto w = worst_case(m);
  EXPECT_EQ(w[0].corner, ProcessCorner::FF);  // tie FF/SF goes to FF
  EXPECT_EQ(w[1].corner, ProcessCorner::TT);
  EXPECT_EQ(w[3].corner, ProcessCorner::TT);
  EXPECT_EQ(w[4].corner, ProcessCorner::FF);  // highest current
  EXPECT_THROW(worst_case({}), Error);
}

TEST(Specs, FomaArithmetic) {
  EXPECT_NEAR(foma_of(265.7, 31.4), 8.46, 0.01);
  EXPECT_NEAR(foma_of(226.7, 42.8), 5.30, 0.01);

  CircuitParams p;
  p.cl = 2e-12;
  const auto f = compute_fom(pm(62.40, 25.30, 65.80, 28.18, 116.4), p);
  EXPECT_EQ(f.formula, "gbw_cl_over_idc");
  EXPECT_NEAR(f.fom, 25.30 * 2.0 / 0.1164, 1e-9);
  EXPECT_DOUBLE_EQ(f.area_um2, p.gate_area_um2());
  EXPECT_DOUBLE_EQ(f.foma, f.fom / f.area_um2);
  EXPECT_NEAR(compute_fom(pm(62.40, 25.30, 65.80, 28.18, 116.4), p, "sr_cl_over_idc").fom,
              28.18 * 2.0 / 0.1164, 1e-9);
  try {
    compute_fom(pm(1, 1, 1, 1, 1), p, "bogus");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_formula);
  }
}
