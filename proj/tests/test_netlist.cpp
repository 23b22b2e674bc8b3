#include <cmath>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "sizer/netlist.hpp"
#include "sizer/types.hpp"
#include "support.hpp"

using namespace sizer;

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

std::string token_of(double x, const char* suffix) {
  std::ostringstream os;
  os << std::setprecision(12) << x << suffix;
  return os.str();
}

}  // namespace

TEST(Eng, SuffixValues) {
  EXPECT_EQ(parse_eng("1t"), 1e12);
  EXPECT_EQ(parse_eng("2g"), 2e9);
  EXPECT_EQ(parse_eng("20meg"), 20e6);
  EXPECT_EQ(parse_eng("20MEG"), 20e6);
  EXPECT_EQ(parse_eng("2.2k"), 2.2e3);
  EXPECT_EQ(parse_eng("5m"), 5e-3);
  EXPECT_EQ(parse_eng("5M"), 5e-3);
  EXPECT_EQ(parse_eng("0.18u"), 0.18e-6);
  EXPECT_EQ(parse_eng("3n"), 3e-9);
  EXPECT_EQ(parse_eng("0.9p"), 0.9e-12);
  EXPECT_EQ(parse_eng("900f"), 900e-15);
  EXPECT_EQ(parse_eng("10uF"), 10e-6);
  EXPECT_EQ(parse_eng("1.8V"), 1.8);
  EXPECT_EQ(parse_eng("1e-12"), 1e-12);
  EXPECT_EQ(parse_eng("-4.7k"), -4.7e3);
  EXPECT_EQ(parse_eng("1.5e3u"), 1.5e-3);
}

TEST(Eng, RoundTripOverAllSuffixes) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> mant(1, 999999);
  std::uniform_int_distribution<int> scale(0, 5);
  const char* suffixes[] = {"t", "g", "meg", "k", "", "m", "u", "n", "p", "f"};
  for (const char* s : suffixes) {
    for (int i = 0; i < 200; ++i) {
      const double x = mant(rng) / std::pow(10.0, scale(rng));
      const std::string token = token_of(x, s);
      const double v = parse_eng(token);
      EXPECT_EQ(parse_eng(format_eng(v)), v) << token << " -> " << format_eng(v);
    }
  }
  for (double v : {1.0, 0.1, 1e-15, 123.456e-9, 7e11, 20e6, 2e-12, 0.18e-6}) {
    EXPECT_EQ(parse_eng(format_eng(v)), v);
  }
  for (double um : {0.18, 0.5, 1.0, 3.33, 12.75}) {
    EXPECT_EQ(EngNumber::parse(format_um(um)).in_unit(-6), um);
  }
  EXPECT_EQ(EngNumber::parse("0.18u").in_unit(-6), 0.18);
  EXPECT_EQ(EngNumber::parse("180n").in_unit(-6), 0.18);
  EXPECT_EQ(EngNumber::parse("1.2p").in_unit(-12), 1.2);
}

TEST(Eng, Malformed) {
  for (const char* bad : {"", "u", "abc", "1.2.3", "1,5", "--1", "1u5"}) {
    EXPECT_EQ(code_of([&] { parse_eng(bad); }), ErrorCode::malformed_number) << bad;
  }
}

TEST(Netlist, ParsesFixture) {
  const auto doc = testing_support::netlist("iter1.cir");
  EXPECT_EQ(doc.text(), testing_support::read_data("iter1.cir"));
  ASSERT_TRUE(doc.devices.contains("M5"));
  EXPECT_EQ(doc.devices.at("M5").m, 2);
  EXPECT_EQ(doc.devices.at("M5").w.rendered, "2u");
  EXPECT_EQ(doc.capacitors.at("C1").value.value, 1e-12);
  const auto p = extract_params(doc);
  EXPECT_EQ(p.M(1).l, 0.18);
  EXPECT_EQ(p.M(7).m, 4);
  EXPECT_EQ(p.cl, 2e-12);
  EXPECT_DOUBLE_EQ(p.gate_area_um2(), 4 * 0.18 + 2 * 1 * 2 + 2 * 1 * 8 + 2 * 0.18 * 4);
}

TEST(Netlist, TextRoundTripWithoutTrailingNewline) {
  const std::string text = "* t\nM1 d g s b nfet W=1u L=1u\nC1 a b 1p";
  EXPECT_EQ(parse_netlist(text).text(), text);
}

TEST(Netlist, PatchKeepsCommentAndSpacing) {
  const auto doc = testing_support::netlist("iter1.cir");
  const auto out = apply_patches(doc, {ParamPatch::m("M5", 3), ParamPatch::w("m5", "2.5u")});
  EXPECT_EQ(out.lines[doc.devices.at("M5").line_index],
            "M5 tail nbias 0 0 nfet W=2.5u L=1u m=3   ; tail mirror");
  EXPECT_EQ(extract_params(out).M(5).m, 3);
}

TEST(Netlist, MissingMultiplierIsAppended) {
  const auto doc = parse_netlist("M1 d g s b nfet W=1u L=1u ; note\n");
  const auto out = apply_patches(doc, {ParamPatch::m("M1", 4)});
  EXPECT_EQ(out.text(), "M1 d g s b nfet W=1u L=1u m=4 ; note\n");
}

// Every application only touches the value token of its target.
TEST(Netlist, BytePreservationFuzz) {
  const auto original = testing_support::netlist("iter1.cir");
  std::mt19937 rng(1234);
  std::uniform_int_distribution<int> role(1, 9);
  std::uniform_int_distribution<int> field(0, 2);
  std::uniform_int_distribution<int> mant(1, 5000);
  std::uniform_int_distribution<int> mult(1, 64);
  const char* len_suffix[] = {"u", "n"};
  NetlistDoc doc = original;
  for (int i = 0; i < 1000; ++i) {
    const int r = role(rng);
    ParamPatch p;
    std::size_t line = 0, pos = 0, len = 0;
    if (r <= 7) {
      const auto name = "M" + std::to_string(r);
      const auto& card = doc.devices.at(name);
      line = card.line_index;
      const int f = field(rng);
      if (f == 2) {
        p = ParamPatch::m(name, mult(rng));
        pos = card.m_span->pos;
        len = card.m_span->len;
      } else {
        const bool n = rng() % 2;
        const auto tok = n ? std::to_string(mant(rng) * 10) + len_suffix[1]
                           : std::to_string(mant(rng)) + "." + std::to_string(rng() % 100) + len_suffix[0];
        p = f == 0 ? ParamPatch::w(name, tok) : ParamPatch::l(name, tok);
        const auto& span = f == 0 ? card.w_span : card.l_span;
        pos = span.pos;
        len = span.len;
      }
    } else {
      const auto name = r == 8 ? "C1" : "CL";
      const auto& card = doc.capacitors.at(name);
      line = card.line_index;
      p = ParamPatch::cap(name, std::to_string(mant(rng)) + "f");
      pos = card.value_span.pos;
      len = card.value_span.len;
    }
    const auto before = doc;
    doc = apply_patches(doc, {p});
    ASSERT_EQ(doc.lines.size(), before.lines.size());
    for (std::size_t k = 0; k < doc.lines.size(); ++k) {
      if (k == line) continue;
      ASSERT_EQ(doc.lines[k], before.lines[k]) << "iteration " << i;
    }
    const auto& old_line = before.lines[line];
    const auto expected = old_line.substr(0, pos) + p.value.rendered + old_line.substr(pos + len);
    ASSERT_EQ(doc.lines[line], expected) << "iteration " << i;
    ASSERT_EQ(parse_netlist(doc.text()).text(), doc.text());
  }
  // Non-card lines never move.
  for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(doc.lines[k], original.lines[k]);
  EXPECT_EQ(doc.lines.back(), ".end");
}

TEST(Netlist, PatchErrors) {
  const auto doc = testing_support::netlist("iter1.cir");
  EXPECT_EQ(code_of([&] { apply_patches(doc, {ParamPatch::w("M9", "1u")}); }),
            ErrorCode::unknown_target);
  EXPECT_EQ(code_of([&] { apply_patches(doc, {ParamPatch::cap("M1", "1p")}); }),
            ErrorCode::illegal_field);
  EXPECT_EQ(code_of([&] { apply_patches(doc, {ParamPatch::w("C1", "1u")}); }),
            ErrorCode::illegal_field);
  EXPECT_EQ(code_of([&] { apply_patches(doc, {ParamPatch::m("M1", 0)}); }),
            ErrorCode::illegal_field);
  EXPECT_EQ(code_of([&] { apply_patches(doc, {ParamPatch::cap("C1", "-1p")}); }),
            ErrorCode::illegal_field);
}

TEST(Netlist, ParseErrors) {
  EXPECT_EQ(code_of([] { parse_netlist("M1 a b c d nfet W=1u L=1u\nm1 a b c d nfet W=1u L=1u\n"); }),
            ErrorCode::duplicate_name);
  EXPECT_EQ(code_of([] { parse_netlist("M1 a b c d nfet L=1u\n"); }), ErrorCode::missing_field);
  EXPECT_EQ(code_of([] { parse_netlist("M1 a b c d nfet W=1u2 L=1u\n"); }), ErrorCode::malformed_number);
  EXPECT_EQ(code_of([] { parse_netlist("C1 a b\n"); }), ErrorCode::missing_field);
  EXPECT_EQ(code_of([] { extract_params(parse_netlist("M1 a b c d nfet W=1u L=1u\n")); }),
            ErrorCode::missing_device);
}

TEST(Netlist, DiffRestateAndSynthesize) {
  auto a = extract_params(testing_support::netlist("iter1.cir"));
  auto b = a;
  b.c1 = 0.7e-12;
  b.M(5).m = 3;
  b.M(1).w = 2.5;
  const auto patches = diff_params(a, b);
  ASSERT_EQ(patches.size(), 3u);
  EXPECT_EQ(patches[0], ParamPatch::cap("C1", "700f"));
  EXPECT_EQ(patches[1], ParamPatch::w("M1", "2.5u"));
  EXPECT_EQ(patches[2], ParamPatch::m("M5", 3));
  EXPECT_EQ(extract_params(apply_patches(testing_support::netlist("iter1.cir"), patches)), b);
  EXPECT_TRUE(diff_params(a, a).empty());

  const auto doc = parse_netlist(synthesize_netlist(b));
  EXPECT_EQ(extract_params(doc), b);
  const auto restated = apply_patches(parse_netlist(synthesize_netlist(a)), restate_params(b));
  EXPECT_EQ(extract_params(restated), b);
}
