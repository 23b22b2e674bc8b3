#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sizer/kv.hpp"
#include "sizer/orchestrator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sizer::cli {

namespace {

// Input problems found before any work starts: exit 2.
struct SetupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ProcessCorner corner_arg(const std::string& text) {
  const auto c = parse_corner(kv::to_upper(text));
  if (!c) throw SetupError(fmt::format("unknown corner '{}'", text));
  return *c;
}

struct Inputs {
  std::string netlist;
  std::string spec;
  std::string luts;
  std::string model_config;
  std::string backend = "analytic";
  std::string recorded;
  std::string spice_command;
  std::vector<std::string> corner_includes;
  std::string work_dir = "sizer-work";

  void add_spec(CLI::App* app) {
    app->add_option("--spec", spec, "Spec file (default targets when omitted)")
        ->check(CLI::ExistingFile);
  }
  void add_luts(CLI::App* app) {
    app->add_option("--luts", luts, "Directory of LUT files (built from the model when omitted)")
        ->check(CLI::ExistingDirectory);
    app->add_option("--model-config", model_config, "Device model overrides")
        ->check(CLI::ExistingFile);
  }
  void add_backend(CLI::App* app) {
    app->add_option("--backend", backend, "Evaluation backend")
        ->check(CLI::IsMember({"analytic", "spice", "stub-fixtures"}));
    app->add_option("--recorded-metrics", recorded, "Recorded metrics for stub-fixtures")
        ->check(CLI::ExistingFile);
    app->add_option("--spice-command", spice_command,
                    "Simulator executable (default $SIZER_SPICE or ngspice)");
    app->add_option("--corner-include", corner_includes, "CORNER=path model include, repeatable");
    app->add_option("--work-dir", work_dir, "Root of per-simulation directories");
  }
};

SpecSet load_specs(const Inputs& in) {
  return in.spec.empty() ? SpecSet::defaults() : SpecSet::load(in.spec);
}

LutSet load_luts(const Inputs& in) {
  if (!in.luts.empty()) return LutSet::load_dir(in.luts);
  const DeviceModel model(in.model_config.empty() ? ModelConfig::defaults()
                                                  : ModelConfig::load(in.model_config));
  return LutSet::build(model, kAllCorners);
}

NetlistDoc load_netlist(const Inputs& in) {
  try {
    return parse_netlist(kv::read_text(in.netlist));
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", in.netlist, e.what()));
  }
}

SpiceConfig spice_config(const Inputs& in, const std::string& run_id) {
  SpiceConfig c;
  if (!in.spice_command.empty()) {
    c.command = in.spice_command;
  } else if (const char* env = std::getenv("SIZER_SPICE"); env && *env) {
    c.command = env;
  }
  for (const auto& item : in.corner_includes) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw SetupError(fmt::format("--corner-include expects CORNER=path, got '{}'", item));
    }
    c.corner_includes[corner_arg(item.substr(0, eq))] = item.substr(eq + 1);
  }
  c.work_root = in.work_dir;
  c.run_id = run_id;
  return c;
}

std::unique_ptr<Evaluator> make_evaluator(const Inputs& in, const LutSet* luts,
                                          const std::string& run_id) {
  if (in.backend == "analytic") return std::make_unique<AnalyticEvaluator>(*luts);
  if (in.backend == "spice") return std::make_unique<SpiceEvaluator>(spice_config(in, run_id));
  if (in.recorded.empty()) throw SetupError("--backend stub-fixtures needs --recorded-metrics");
  return std::make_unique<RecordedEvaluator>(RecordedEvaluator::load(in.recorded));
}

LlmEndpoint load_endpoint(const std::string& path) {
  return path.empty() ? LlmEndpoint{} : LlmEndpoint::load(path);
}

void require_credential(const LlmEndpoint& endpoint) {
  if (!credential_present(endpoint)) {
    throw SetupError(fmt::format("LLM strategies need the {} environment variable",
                                 endpoint.credential_env));
  }
}

// ----------------------------------------------------------------------------
// Tables

std::string params_table(const CircuitParams& p, const NameMap& names = NameMap{}) {
  std::string out = fmt::format("{:<6} {:>9} {:>9} {:>4}\n", "Device", "W", "L", "m");
  for (int n = 1; n <= static_cast<int>(kNumRoles); ++n) {
    const auto& d = p.M(n);
    out += fmt::format("{:<6} {:>9} {:>9} {:>4}\n", names.devices[n - 1], format_um(d.w),
                       format_um(d.l), d.m);
  }
  out += fmt::format("{:<6} {:>9}\n{:<6} {:>9}\n", names.c1, format_eng(p.c1), names.cl,
                     format_eng(p.cl));
  return out;
}

std::string worst_case_table(const std::map<ProcessCorner, PerfMetrics>& metrics,
                             const SpecSet& specs) {
  const auto worst = worst_case(metrics, specs);
  std::string corners;
  for (const auto& [c, m] : metrics) corners += fmt::format("{}{}", corners.empty() ? "" : ", ", to_string(c));
  std::string out = fmt::format("Worst case over {} (corner targets)\n", corners);
  out += fmt::format("{:<6} {:>16} {:>16} {:>6} {:>9}  {}\n", "Metric", "Target", "Worst", "Corner",
                     "Margin", "Status");
  for (auto m : kAllMetrics) {
    const auto& item = specs[m];
    const double t = item.corner_target();
    const double v = worst[static_cast<std::size_t>(m)].value;
    const bool up = item.direction == Direction::at_least;
    const double margin = up ? (v - t) / t : (t - v) / t;
    out += fmt::format("{:<6} {:>16} {:>16} {:>6} {:>+8.1f}%  {}\n", to_string(m),
                       (up ? "> " : "< ") + format_metric(m, t), format_metric(m, v),
                       to_string(worst[static_cast<std::size_t>(m)].corner), margin * 100.0,
                       (up ? v >= t : v <= t) ? "pass" : "FAIL");
  }
  return out;
}

std::string metrics_line(const PerfMetrics& pm) {
  std::string out;
  for (auto m : kAllMetrics) {
    out += fmt::format("{}{} {}", out.empty() ? "" : "  ", to_string(m),
                       format_metric(m, metric_value(pm, m)));
  }
  return out;
}

std::string iteration_summary(const RunOutcome& o) {
  return fmt::format("{} (TT:{}, corner:{})", o.total_iterations(), o.tt_iterations(),
                     o.corner_iterations());
}

std::string stall_text(const StallEvidence& s) {
  return fmt::format("{}: {}", to_string(s.kind), s.detail);
}

void print_summary(std::ostream& out, const RunOutcome& o, const SpecSet& specs,
                   const std::string& fom_formula) {
  out << fmt::format("\nstatus: {}\niterations: {}\n", to_string(o.status), iteration_summary(o));
  if (o.stall) out << fmt::format("stall: {}\n", stall_text(*o.stall));
  if (!o.error.empty()) out << fmt::format("error: {}\n", o.error);
  const auto* fin = o.final_record();
  if (!fin) return;
  out << fmt::format("\nFinal parameters (iteration {})\n{}", fin->iteration, params_table(fin->params));
  const auto tt = fin->metrics.find(ProcessCorner::TT);
  if (tt != fin->metrics.end()) {
    out << fmt::format("\nTypical results (TT)\n{}",
                       format_report_table(evaluate_specs(tt->second, specs, EvalMode::tt)));
  }
  if (fin->metrics.size() > 1) out << "\n" << worst_case_table(fin->metrics, specs);
  if (tt != fin->metrics.end()) {
    const auto f = compute_fom(tt->second, fin->params, fom_formula);
    out << fmt::format("\nFOM [{}] {:.2f}\nArea {:.2f} um^2\nFoMA {:.2f}\n", f.formula, f.fom,
                       f.area_um2, f.foma);
  }
}

int status_exit(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return kOk;
    case RunStatus::iteration_limit: return kBudget;
    case RunStatus::stalled: return kStalled;
    case RunStatus::error: return kError;
  }
  return kError;
}

// ----------------------------------------------------------------------------
// Verbs

struct LutBuildArgs {
  std::string kind = "both";
  std::string corner = "TT";
  bool all_corners = false;
  std::string out;
  std::string model_config;
  bool force = false;
};

int lut_build(const LutBuildArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<DeviceKind> kinds;
  if (a.kind != "pmos") kinds.push_back(DeviceKind::nmos);
  if (a.kind != "nmos") kinds.push_back(DeviceKind::pmos);
  std::vector<ProcessCorner> corners;
  if (a.all_corners) corners.assign(kAllCorners.begin(), kAllCorners.end());
  else corners.push_back(corner_arg(a.corner));

  const DeviceModel model(a.model_config.empty() ? ModelConfig::defaults()
                                                 : ModelConfig::load(a.model_config));
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) {
    throw SetupError(fmt::format("cannot create output directory '{}'", a.out));
  }
  std::vector<std::string> existing;
  for (auto c : corners) {
    for (auto k : kinds) {
      const auto path = fs::path(a.out) / LutSet::file_name(k, c);
      if (fs::exists(path)) existing.push_back(path.string());
    }
  }
  if (!existing.empty() && !a.force) {
    throw SetupError(fmt::format("refusing to overwrite {} (use --force)", fmt::join(existing, ", ")));
  }

  for (auto c : corners) {
    for (auto k : kinds) {
      const auto path = fs::path(a.out) / LutSet::file_name(k, c);
      try {
        const auto grid = build_lut(model, k, c);
        kv::write_text(path, serialize(grid));
        out << fmt::format("{} {}: {} L x {} Vgs at Vds {} V -> {}\n", to_string(k), to_string(c),
                           grid.l_axis.size(), grid.vgs_axis.size(), grid.vds, path.string());
      } catch (const Error& e) {
        err << fmt::format("error: {} {}: {}\n", to_string(k), to_string(c), e.what());
        return kError;
      }
    }
  }
  return kOk;
}

struct LutQueryArgs {
  Inputs in;
  std::string kind = "nmos";
  std::string corner = "TT";
  double l_um = 0.0;
  std::optional<double> vgs, gm_id, gm;
  double id_budget = 0.0;
  double max_width = kDefaultMaxWidth;
};

int lut_query(const LutQueryArgs& a, std::ostream& out, std::ostream& err) {
  const auto kind = parse_device_kind(a.kind);
  const auto corner = corner_arg(a.corner);
  const auto luts = load_luts(a.in);
  const auto& grid = luts.get(*kind, corner);
  try {
    if (a.gm) {
      const auto r = size_for_gm(grid, a.l_um, *a.gm, a.id_budget, a.max_width);
      out << fmt::format("{} {} L={}u gm={:.4e} S Id<={:.4e} A\n", to_string(*kind),
                         to_string(corner), a.l_um, *a.gm, a.id_budget);
      out << fmt::format("W      {:.4f} um\nVgs    {:.4f} V\nVov    {:.4f} V\ngm     {:.4e} S\nId     {:.4e} A\n",
                         r.w, r.vgs, r.vov, r.achieved_gm, r.achieved_id);
      return kOk;
    }
    const double vgs = a.vgs ? *a.vgs : invert_gm_over_id(grid, a.l_um, *a.gm_id);
    const auto op = query(grid, a.l_um, vgs);
    out << fmt::format("{} {} L={}u Vgs={:.4f} V Vds={} V\n", to_string(*kind), to_string(corner),
                       a.l_um, vgs, grid.vds);
    out << fmt::format("gm/Id  {:.4f} 1/V\nVov    {:.4f} V\nId/W   {:.4e} A/um\ngm/W   {:.4e} S/um\n"
                       "gds/W  {:.4e} S/um\ncgg/W  {:.4e} F/um\n",
                       op.gm_over_id, op.vov, op.id_per_w, op.gm_per_w, op.gds_per_w, op.cgg_per_w);
    return kOk;
  } catch (const Error& e) {
    err << fmt::format("error: {}\n", e.what());
    return kError;
  }
}

struct SimulateArgs {
  Inputs in;
  std::string corner = "TT";
  bool all_corners = false;
};

int simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const auto specs = load_specs(a.in);
  const auto doc = load_netlist(a.in);
  const auto params = extract_params(doc);
  std::optional<LutSet> luts;
  if (a.in.backend == "analytic") luts = load_luts(a.in);
  auto ev = make_evaluator(a.in, luts ? &*luts : nullptr, "simulate");
  std::vector<ProcessCorner> corners;
  if (a.all_corners) corners.assign(kAllCorners.begin(), kAllCorners.end());
  else corners.push_back(corner_arg(a.corner));

  std::map<ProcessCorner, PerfMetrics> results;
  for (auto c : corners) {
    try {
      results[c] = ev->evaluate(doc, params, c, 0);
    } catch (const Error& e) {
      err << fmt::format("error: {} at {}: {}\n", ev->name(), to_string(c), e.what());
      return kError;
    }
    out << fmt::format("{:<3} {}\n", to_string(c), metrics_line(results[c]));
  }
  if (!a.in.spec.empty()) {
    for (const auto& [c, pm] : results) {
      const auto mode = c == ProcessCorner::TT ? EvalMode::tt : EvalMode::corner;
      out << fmt::format("\n{} ({} targets)\n{}", to_string(c),
                         mode == EvalMode::tt ? "typical" : "corner",
                         format_report_table(evaluate_specs(pm, specs, mode)));
    }
  }
  if (results.size() > 1) out << "\n" << worst_case_table(results, specs);
  return kOk;
}

struct OptimizeArgs {
  Inputs in;
  std::string strategy;
  std::string log;
  int max_iters = 15;
  int max_corner_iters = 5;
  std::string replay_script;
  std::string llm_config;
  std::string fom = "gbw_cl_over_idc";
  bool records = false;
};

bool needs_luts(const std::string& strategy, const std::string& backend) {
  return backend == "analytic" || strategy == "gmid" || strategy.starts_with("llm");
}

std::unique_ptr<Strategist> make_strategist(const std::string& strategy, const LutSet* luts,
                                            const SpecSet& specs, const std::string& replay_script,
                                            const std::string& llm_config) {
  if (strategy == "rules") return std::make_unique<RuleStrategist>();
  if (strategy == "gmid") return std::make_unique<GmidStrategist>(*luts);
  if (strategy == "replay") {
    if (replay_script.empty()) throw SetupError("--strategy replay needs --replay-script");
    return std::make_unique<ReplayStrategist>(parse_replay_script(kv::read_text(replay_script)));
  }
  auto endpoint = load_endpoint(llm_config);
  require_credential(endpoint);
  const auto mode = strategy == "llm" ? KnowledgeMode::with_gmid : KnowledgeMode::without_gmid;
  return std::make_unique<LlmStrategist>(std::move(endpoint), std::make_shared<HttpChatTransport>(),
                                         make_static_knowledge(*luts, specs), mode,
                                         role_parse_options());
}

int optimize(const OptimizeArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  cfg.specs = load_specs(a.in);
  cfg.max_tt_iters = a.max_iters;
  cfg.max_corner_iters = a.max_corner_iters;
  cfg.log_path = a.log;
  cfg.validate();
  const auto doc = load_netlist(a.in);
  extract_params(doc, cfg.names);
  std::optional<LutSet> luts;
  if (needs_luts(a.strategy, a.in.backend)) luts = load_luts(a.in);
  const LutSet* lp = luts ? &*luts : nullptr;
  auto strategist = make_strategist(a.strategy, lp, cfg.specs, a.replay_script, a.llm_config);
  const auto run_id = a.log.empty() ? std::string("run") : fs::path(a.log).stem().string();
  auto evaluator = make_evaluator(a.in, lp, run_id);
  compute_fom(PerfMetrics{0, 0, 0, 0, 1e-3}, CircuitParams{}, a.fom);

  if (a.records) {
    out << runlog_header_json() << "\n";
  } else {
    out << fmt::format("optimize: strategy {}, backend {}, budget TT {} / corner {}\n",
                       strategist->name(), evaluator->name(), cfg.max_tt_iters, cfg.max_corner_iters);
  }
  const auto outcome = run_optimization(
      cfg, *strategist, *evaluator, doc,
      [&](const IterationRecord& r) {
        out << (a.records ? record_to_json(r) : format_record_line(r)) << "\n";
        out.flush();
      },
      a.fom);
  if (a.records) {
    out << outcome_to_json(outcome) << "\n";
  } else {
    print_summary(out, outcome, cfg.specs, a.fom);
  }
  if (outcome.status == RunStatus::error) err << fmt::format("error: {}\n", outcome.error);
  return status_exit(outcome.status);
}

struct ReportArgs {
  std::string log;
  std::string fom = "gbw_cl_over_idc";
  std::string spec;
};

int report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  Inputs in;
  in.spec = a.spec;
  const auto specs = load_specs(in);
  compute_fom(PerfMetrics{0, 0, 0, 0, 1e-3}, CircuitParams{}, a.fom);
  LoadedRun run;
  try {
    run = load_run(a.log);
  } catch (const Error& e) {
    err << fmt::format("error: {}\n", e.what());
    return kError;
  }
  for (const auto& w : run.warnings) err << fmt::format("warning: {}\n", w);
  if (run.records.empty()) {
    err << fmt::format("error: run log {} has no records\n", a.log);
    return kError;
  }
  RunOutcome o;
  o.status = run.status.value_or(RunStatus::error);
  o.history = run.records;
  o.stall = run.stall;
  o.error = run.error;
  if (!run.status) out << "run incomplete: no outcome line\n";
  print_summary(out, o, specs, a.fom);
  if (o.status == RunStatus::converged) {
    const std::vector<ProcessCorner> corners(kAllCorners.begin(), kAllCorners.end());
    out << fmt::format("\nrecheck from log: {}\n",
                       recheck_converged(run, specs, corners) ? "all corners pass" : "FAILED");
  }
  return kOk;
}

struct AblateArgs {
  Inputs in;
  std::string out;
  int max_iters = 15;
  int max_corner_iters = 5;
  std::string llm_config;
};

int ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.in.backend != "analytic" && a.in.backend != "spice") {
    throw SetupError("ablate runs on the analytic or spice backend");
  }
  RunConfig base;
  base.specs = load_specs(a.in);
  base.max_tt_iters = a.max_iters;
  base.max_corner_iters = a.max_corner_iters;
  base.validate();
  const auto doc = load_netlist(a.in);
  extract_params(doc, base.names);
  const auto luts = load_luts(a.in);
  const auto endpoint = load_endpoint(a.llm_config);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) {
    throw SetupError(fmt::format("cannot create output directory '{}'", a.out));
  }

  std::vector<json> rows;
  bool any_error = false;
  out << fmt::format("{:<12} {:<16} {:<20} {}\n", "Strategy", "Result", "Iterations", "Failure mode");
  for (const std::string name : {"gmid", "rules", "llm", "llm-no-gmid"}) {
    json row = {{"strategy", name}};
    if (name.starts_with("llm") && !credential_present(endpoint)) {
      row["status"] = "skipped";
      row["reason"] = fmt::format("{} not set", endpoint.credential_env);
      out << fmt::format("{:<12} {:<16} {:<20} {}\n", name, "skipped", "-", row["reason"].get<std::string>());
      rows.push_back(row);
      continue;
    }
    RunConfig cfg = base;
    cfg.log_path = fs::path(a.out) / (name + ".jsonl");
    RunOutcome o;
    try {
      auto strategist = make_strategist(name, &luts, cfg.specs, "", a.llm_config);
      auto evaluator = make_evaluator(a.in, &luts, name);
      o = run_optimization(cfg, *strategist, *evaluator, doc);
    } catch (const std::exception& e) {
      o.status = RunStatus::error;
      o.error = e.what();
    }
    any_error = any_error || o.status == RunStatus::error;
    std::string failure = "-";
    if (o.stall) failure = stall_text(*o.stall);
    else if (o.status == RunStatus::error) failure = "error: " + o.error;
    else if (o.status == RunStatus::iteration_limit) failure = "iteration budget exhausted";
    row["status"] = std::string(to_string(o.status));
    row["converged"] = o.status == RunStatus::converged;
    row["iterations"] = o.total_iterations();
    row["tt_iterations"] = o.tt_iterations();
    row["corner_iterations"] = o.corner_iterations();
    row["failure_kind"] = o.stall ? std::string(to_string(o.stall->kind))
                          : o.status == RunStatus::converged ? ""
                                                             : std::string(to_string(o.status));
    row["failure"] = failure == "-" ? "" : failure;
    row["log"] = cfg.log_path.filename().string();
    if (o.fom) row["fom"] = o.fom->fom;
    out << fmt::format("{:<12} {:<16} {:<20} {}\n", name, to_string(o.status), iteration_summary(o),
                       failure);
    rows.push_back(row);
  }
  std::string table;
  for (const auto& r : rows) table += r.dump() + "\n";
  kv::write_text(fs::path(a.out) / "ablation.jsonl", table);
  out << fmt::format("\nrecords: {}\n", (fs::path(a.out) / "ablation.jsonl").string());
  if (any_error) {
    err << "error: at least one strategist run failed\n";
    return kError;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage op-amp sizing with gm/Id lookup tables", "sizer"};
  app.require_subcommand(1, 1);

  LutBuildArgs lb;
  auto* c_lb = app.add_subcommand("lut-build", "Build gm/Id lookup tables from the device model");
  c_lb->add_option("--kind", lb.kind, "nmos, pmos or both")->check(CLI::IsMember({"nmos", "pmos", "both"}));
  auto* lb_corner = c_lb->add_option("--corner", lb.corner, "Process corner");
  c_lb->add_flag("--all-corners", lb.all_corners, "All five corners")->excludes(lb_corner);
  c_lb->add_option("--out", lb.out, "Output directory")->required();
  c_lb->add_option("--model-config", lb.model_config, "Device model overrides")->check(CLI::ExistingFile);
  c_lb->add_flag("--force", lb.force, "Overwrite existing files");

  LutQueryArgs lq;
  auto* c_lq = app.add_subcommand("lut-query", "Query a lookup table");
  lq.in.add_luts(c_lq);
  c_lq->add_option("--kind", lq.kind, "nmos or pmos")->check(CLI::IsMember({"nmos", "pmos"}));
  c_lq->add_option("--corner", lq.corner, "Process corner");
  c_lq->add_option("--l", lq.l_um, "Channel length in um")->required();
  auto* q_vgs = c_lq->add_option("--vgs", lq.vgs, "Gate-source voltage");
  auto* q_ratio = c_lq->add_option("--gm-id", lq.gm_id, "Target gm/Id");
  auto* q_gm = c_lq->add_option("--gm", lq.gm, "Target gm in S (sizes W)");
  c_lq->add_option("--id-budget", lq.id_budget, "Drain current for --gm, A")->needs(q_gm);
  c_lq->add_option("--max-width", lq.max_width, "Width ceiling for --gm, um");
  q_vgs->excludes(q_ratio)->excludes(q_gm);
  q_ratio->excludes(q_gm);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Evaluate one netlist");
  c_sim->add_option("--netlist", sim.in.netlist, "Netlist")->required()->check(CLI::ExistingFile);
  sim.in.add_spec(c_sim);
  sim.in.add_luts(c_sim);
  sim.in.add_backend(c_sim);
  auto* sim_corner = c_sim->add_option("--corner", sim.corner, "Process corner");
  c_sim->add_flag("--all-corners", sim.all_corners, "All five corners")->excludes(sim_corner);

  OptimizeArgs opt;
  auto* c_opt = app.add_subcommand("optimize", "Run the sizing loop");
  c_opt->add_option("--netlist", opt.in.netlist, "Seed netlist")->required()->check(CLI::ExistingFile);
  opt.in.add_spec(c_opt);
  c_opt->add_option("--strategy", opt.strategy, "Strategist")
      ->required()
      ->check(CLI::IsMember({"llm", "llm-no-gmid", "rules", "gmid", "replay"}));
  opt.in.add_backend(c_opt);
  opt.in.add_luts(c_opt);
  c_opt->add_option("--log", opt.log, "Run log path (JSON lines)");
  c_opt->add_option("--max-iters", opt.max_iters, "TT-phase iteration budget");
  c_opt->add_option("--max-corner-iters", opt.max_corner_iters, "Corner-phase iteration budget");
  c_opt->add_option("--replay-script", opt.replay_script, "Patch script for --strategy replay")
      ->check(CLI::ExistingFile);
  c_opt->add_option("--llm-config", opt.llm_config, "Endpoint config for LLM strategies")
      ->check(CLI::ExistingFile);
  c_opt->add_option("--fom", opt.fom, "FOM formula");
  c_opt->add_flag("--records", opt.records, "Print run-log records instead of tables");

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Summarize a run log");
  c_rep->add_option("--log", rep.log, "Run log")->required();
  c_rep->add_option("--fom", rep.fom, "FOM formula");
  c_rep->add_option("--spec", rep.spec, "Spec file")->check(CLI::ExistingFile);

  AblateArgs abl;
  auto* c_abl = app.add_subcommand("ablate", "Compare strategists under one budget");
  c_abl->add_option("--netlist", abl.in.netlist, "Seed netlist")->required()->check(CLI::ExistingFile);
  abl.in.add_spec(c_abl);
  abl.in.add_luts(c_abl);
  abl.in.add_backend(c_abl);
  c_abl->add_option("--out", abl.out, "Output directory")->required();
  c_abl->add_option("--max-iters", abl.max_iters, "TT-phase iteration budget");
  c_abl->add_option("--max-corner-iters", abl.max_corner_iters, "Corner-phase iteration budget");
  c_abl->add_option("--llm-config", abl.llm_config, "Endpoint config for LLM strategies")
      ->check(CLI::ExistingFile);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_lb) return lut_build(lb, out, err);
    if (*c_lq) {
      if (!lq.vgs && !lq.gm_id && !lq.gm) throw SetupError("lut-query needs --vgs, --gm-id or --gm");
      return lut_query(lq, out, err);
    }
    if (*c_sim) return simulate(sim, out, err);
    if (*c_opt) return optimize(opt, out, err);
    if (*c_rep) return report(rep, out, err);
    if (*c_abl) return ablate(abl, out, err);
  } catch (const SetupError& e) {
    err << fmt::format("error: {}\n", e.what());
    return kUsage;
  } catch (const Error& e) {
    err << fmt::format("error: {}\n", e.what());
    return e.code() == ErrorCode::config || e.code() == ErrorCode::format ||
                   e.code() == ErrorCode::io || e.code() == ErrorCode::auth ||
                   e.code() == ErrorCode::unknown_formula || e.code() == ErrorCode::missing_device ||
                   e.code() == ErrorCode::malformed_number || e.code() == ErrorCode::duplicate_name ||
                   e.code() == ErrorCode::missing_field
               ? kUsage
               : kError;
  } catch (const std::exception& e) {
    err << fmt::format("error: {}\n", e.what());
    return kError;
  }
  return kUsage;
}

}  // namespace sizer::cli
