#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "sizer/gmid_lut.hpp"
#include "sizer/kv.hpp"
#include "support.hpp"

using namespace sizer;
using testing_support::data;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

bool has(const std::string& text, const std::string& part) {
  return text.find(part) != std::string::npos;
}

std::vector<std::string> replay_args(const std::string& log) {
  return {"optimize", "--netlist", data("iter1.cir").string(), "--strategy", "replay",
          "--replay-script", data("table3.replay").string(), "--backend", "stub-fixtures",
          "--recorded-metrics", data("table3_metrics.json").string(), "--log", log};
}

}  // namespace

TEST(Cli, ReplayOptimizeAndReport) {
  testing_support::TempDir dir("cli-replay");
  const auto log = (dir / "run.jsonl").string();
  const auto r = run(replay_args(log));
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(has(r.out, "6 (TT:5, corner:1)")) << r.out;
  EXPECT_TRUE(has(r.out, "converged")) << r.out;
  EXPECT_TRUE(has(r.out, "900f")) << r.out;

  const auto rep = run({"report", "--log", log, "--fom", "sr_cl_over_idc"});
  ASSERT_EQ(rep.code, cli::kOk) << rep.err;
  EXPECT_TRUE(has(rep.out, "recheck from log: all corners pass")) << rep.out;
  EXPECT_TRUE(has(rep.out, "FOM [sr_cl_over_idc]")) << rep.out;
  EXPECT_EQ(run({"report", "--log", log, "--fom", "nonsense"}).code, cli::kUsage);
}

TEST(Cli, DeterministicOutput) {
  testing_support::TempDir da("cli-det-a"), db("cli-det-b");
  auto a = replay_args((da / "run.jsonl").string());
  auto b = replay_args((db / "run.jsonl").string());
  a.push_back("--records");
  b.push_back("--records");
  auto strip = [](std::string s) {
    std::string out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) {
      if (line.starts_with("{") && line.find("\"wall_ms\"") != std::string::npos) {
        auto j = nlohmann::json::parse(line);
        j.erase("wall_ms");
        line = j.dump();
      }
      out += line + "\n";
    }
    return out;
  };
  const auto ra = run(a), rb = run(b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  EXPECT_EQ(strip(ra.out), strip(rb.out));
  const auto g1 = run({"optimize", "--netlist", data("iter1.cir").string(), "--strategy", "gmid"});
  const auto g2 = run({"optimize", "--netlist", data("iter1.cir").string(), "--strategy", "gmid"});
  EXPECT_EQ(g1.code, cli::kOk) << g1.err;
  EXPECT_EQ(g1.out, g2.out);
}

TEST(Cli, StallAndCredentialExitCodes) {
  const auto r = run({"optimize", "--netlist", data("gain_limited.cir").string(), "--strategy", "rules"});
  EXPECT_EQ(r.code, cli::kStalled) << r.out << r.err;
  EXPECT_TRUE(has(r.out, "recur at iteration")) << r.out;

  const char* saved = std::getenv("SIZER_LLM_API_KEY");
  const std::string keep = saved ? saved : "";
  ::unsetenv("SIZER_LLM_API_KEY");
  const auto llm = run({"optimize", "--netlist", data("iter1.cir").string(), "--strategy", "llm"});
  if (saved) ::setenv("SIZER_LLM_API_KEY", keep.c_str(), 1);
  EXPECT_EQ(llm.code, cli::kUsage);
  EXPECT_TRUE(has(llm.err, "SIZER_LLM_API_KEY")) << llm.err;
}

TEST(Cli, LutBuildAndQuery) {
  testing_support::TempDir dir("cli-lut");
  const auto out = (dir / "luts").string();
  ASSERT_EQ(run({"lut-build", "--all-corners", "--out", out}).code, cli::kOk);
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(out)) files += e.path().extension() == ".lut";
  EXPECT_EQ(files, 10);
  EXPECT_EQ(run({"lut-build", "--all-corners", "--out", out}).code, cli::kUsage);
  EXPECT_EQ(run({"lut-build", "--all-corners", "--out", out, "--force"}).code, cli::kOk);
  const auto grid = deserialize(kv::read_text(std::filesystem::path(out) / "nmos_TT.lut"));
  EXPECT_EQ(serialize(grid), serialize(testing_support::default_luts().get(DeviceKind::nmos,
                                                                           ProcessCorner::TT)));
  const auto q = run({"lut-query", "--luts", out, "--kind", "nmos", "--l", "0.5", "--gm-id", "12"});
  EXPECT_EQ(q.code, cli::kOk) << q.err;
  EXPECT_EQ(run({"lut-query", "--luts", out, "--l", "0.5"}).code, cli::kUsage);
}

TEST(Cli, ReportErrors) {
  testing_support::TempDir dir("cli-report");
  kv::write_text(dir / "empty.jsonl", "");
  const auto r = run({"report", "--log", (dir / "empty.jsonl").string()});
  EXPECT_EQ(r.code, cli::kError);
  EXPECT_TRUE(has(r.err, "has no records")) << r.err;
  kv::write_text(dir / "bad.jsonl", "{\"schema\":\"sizer-runlog\",\"version\":1}\n{oops\n{}\n");
  EXPECT_EQ(run({"report", "--log", (dir / "bad.jsonl").string()}).code, cli::kError);
}

TEST(Cli, AblateWritesSummaryRows) {
  testing_support::TempDir dir("cli-ablate");
  const char* saved = std::getenv("SIZER_LLM_API_KEY");
  const std::string keep = saved ? saved : "";
  ::unsetenv("SIZER_LLM_API_KEY");
  const auto r = run({"ablate", "--netlist", data("gain_limited.cir").string(), "--out",
                      dir.path().string()});
  if (saved) ::setenv("SIZER_LLM_API_KEY", keep.c_str(), 1);
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::map<std::string, nlohmann::json> rows;
  std::istringstream in(kv::read_text(dir / "ablation.jsonl"));
  for (std::string line; std::getline(in, line);) {
    auto j = nlohmann::json::parse(line);
    rows[j["strategy"]] = j;
  }
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows["rules"]["status"], "stalled");
  EXPECT_EQ(rows["rules"]["failure_kind"], "cycle");
  EXPECT_EQ(rows["gmid"]["status"], "converged");
  EXPECT_EQ(rows["llm"]["status"], "skipped");
  EXPECT_EQ(rows["llm-no-gmid"]["status"], "skipped");
  EXPECT_TRUE(std::filesystem::exists(dir / "rules.jsonl"));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run({"optimize", "--netlist", data("iter1.cir").string(), "--bogus"}).code, cli::kUsage);
  EXPECT_EQ(run({"optimize", "--netlist", "/nonexistent.cir"}).code, cli::kUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}
