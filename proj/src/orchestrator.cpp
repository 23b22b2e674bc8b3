#include "sizer/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "sizer/kv.hpp"

namespace sizer {

using nlohmann::json;

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::iteration_limit: return "iteration_limit";
    case RunStatus::stalled: return "stalled";
    case RunStatus::error: return "error";
  }
  return "?";
}

std::optional<RunStatus> parse_run_status(std::string_view text) {
  for (auto s : {RunStatus::converged, RunStatus::iteration_limit, RunStatus::stalled,
                 RunStatus::error}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string_view to_string(StallEvidence::Kind k) {
  switch (k) {
    case StallEvidence::Kind::cycle: return "cycle";
    case StallEvidence::Kind::plateau: return "plateau";
    case StallEvidence::Kind::oscillation: return "oscillation";
    case StallEvidence::Kind::gave_up: return "gave_up";
  }
  return "?";
}

void RunConfig::validate() const {
  if (max_tt_iters < 1 || max_corner_iters < 1) {
    throw Error(ErrorCode::config, "iteration limits must be >= 1");
  }
  if (corners.empty()) throw Error(ErrorCode::config, "corner list is empty");
  std::set<ProcessCorner> seen(corners.begin(), corners.end());
  if (seen.size() != corners.size()) throw Error(ErrorCode::config, "corner list has duplicates");
  if (stall_window < 3) throw Error(ErrorCode::config, "stall window must be >= 3");
}

int RunOutcome::tt_iterations() const {
  return static_cast<int>(std::count_if(history.begin(), history.end(), [](const auto& r) {
    return !r.probe && r.phase == Phase::tt;
  }));
}

int RunOutcome::corner_iterations() const {
  return static_cast<int>(std::count_if(history.begin(), history.end(), [](const auto& r) {
    return !r.probe && r.phase == Phase::corner;
  }));
}

// ----------------------------------------------------------------------------

namespace {

std::string edit_signature(const ActionPlan& plan) {
  std::vector<std::string> keys;
  for (const auto& p : plan.patches) {
    keys.push_back(fmt::format("{}.{}", kv::to_upper(p.target), to_string(p.field)));
  }
  std::sort(keys.begin(), keys.end());
  return fmt::format("{}", fmt::join(keys, "+"));
}

std::set<std::pair<Metric, ProcessCorner>> unmet_set(const IterationRecord& r) {
  std::set<std::pair<Metric, ProcessCorner>> out;
  for (const auto& [corner, report] : r.reports) {
    for (auto m : kAllMetrics) {
      if (!report[m].pass) out.emplace(m, corner);
    }
  }
  return out;
}

std::optional<StallEvidence> oscillation(const std::vector<IterationRecord>& w) {
  const auto n = w.size();
  if (w.back().all_pass) return std::nullopt;
  std::vector<std::string> sig;
  for (const auto& r : w) sig.push_back(edit_signature(r.plan));
  for (std::size_t period = 2; period * 2 <= n; ++period) {
    bool periodic = true;
    for (std::size_t i = period; i < n && periodic; ++i) periodic = sig[i] == sig[i - period];
    if (!periodic) continue;
    const bool varied = std::any_of(sig.begin() + 1, sig.begin() + static_cast<std::ptrdiff_t>(period),
                                    [&](const auto& s) { return s != sig[0]; });
    if (!varied) continue;
    if (unmet_set(w[n - 1]) != unmet_set(w[n - 1 - period])) continue;
    std::vector<std::string> cycle(sig.end() - static_cast<std::ptrdiff_t>(period), sig.end());
    return StallEvidence{StallEvidence::Kind::oscillation,
                         fmt::format("edits [{}] repeat with period {} over iterations {}-{} "
                                     "with the same unmet specs",
                                     fmt::join(cycle, " | "), period, w.front().iteration,
                                     w.back().iteration)};
  }
  return std::nullopt;
}

}  // namespace

std::optional<StallEvidence> diagnose_stall(const std::vector<IterationRecord>& history,
                                            std::size_t window, double threshold) {
  if (window < 2 || history.size() < window) return std::nullopt;
  const auto first = history.end() - static_cast<std::ptrdiff_t>(window);
  for (auto a = first; a != history.end(); ++a) {
    for (auto b = a + 1; b != history.end(); ++b) {
      if (a->params == b->params) {
        return StallEvidence{StallEvidence::Kind::cycle,
                             fmt::format("parameters of iteration {} recur at iteration {}",
                                         a->iteration, b->iteration)};
      }
    }
  }
  const auto& oldest = *first;
  const auto& newest = history.back();
  std::vector<std::string> stuck;
  bool progress = false;
  for (const auto& [corner, report] : newest.reports) {
    const auto old = oldest.reports.find(corner);
    for (auto m : kAllMetrics) {
      if (report[m].pass) continue;
      if (old == oldest.reports.end()) {
        progress = true;
        continue;
      }
      if (report[m].margin_frac - old->second[m].margin_frac > threshold) progress = true;
      stuck.push_back(fmt::format("{}@{} {:+.1f}%->{:+.1f}%", to_string(m), to_string(corner),
                                  old->second[m].margin_frac * 100, report[m].margin_frac * 100));
    }
  }
  if (!progress && !stuck.empty()) {
    return StallEvidence{StallEvidence::Kind::plateau,
                         fmt::format("no margin gain above {:.1f}% over iterations {}-{}: {}",
                                     threshold * 100, oldest.iteration, newest.iteration,
                                     fmt::join(stuck, ", "))};
  }
  return oscillation(std::vector<IterationRecord>(first, history.end()));
}

bool detect_stall(const std::vector<IterationRecord>& history, std::size_t window,
                  double threshold) {
  return diagnose_stall(history, window, threshold).has_value();
}

namespace {

std::string metrics_segment(const IterationRecord& r) {
  std::vector<std::string> parts;
  for (const auto& [corner, report] : r.reports) {
    std::vector<std::string> items;
    for (auto m : kAllMetrics) {
      items.push_back(fmt::format("{} {} {}", to_string(m), format_metric(m, report[m].value),
                                  report[m].pass ? "ok" : "FAIL"));
    }
    parts.push_back(fmt::format("{}: {}", to_string(corner), fmt::join(items, ", ")));
  }
  return fmt::format("{}", fmt::join(parts, "; "));
}

std::string change_segment(const CircuitParams* before, const CircuitParams& after,
                           const NameMap& names) {
  if (!before) return "seed";
  std::vector<std::string> parts;
  if (before->c1 != after.c1) {
    parts.push_back(fmt::format("{} {}->{}", names.c1, format_eng(before->c1), format_eng(after.c1)));
  }
  for (int n = 1; n <= static_cast<int>(kNumRoles); ++n) {
    const auto& a = before->M(n);
    const auto& b = after.M(n);
    const auto& name = names.devices[n - 1];
    if (a.w != b.w) parts.push_back(fmt::format("{}.W {}->{}", name, format_um(a.w), format_um(b.w)));
    if (a.l != b.l) parts.push_back(fmt::format("{}.L {}->{}", name, format_um(a.l), format_um(b.l)));
    if (a.m != b.m) parts.push_back(fmt::format("{}.m {}->{}", name, a.m, b.m));
  }
  if (parts.empty()) return "no change";
  return fmt::format("{}", fmt::join(parts, ", "));
}

}  // namespace

std::string summarize_history(const std::vector<IterationRecord>& history, std::size_t k,
                              const SpecSet& specs, const NameMap& names) {
  (void)specs;
  if (history.empty() || k == 0) return "none";
  const std::size_t start = history.size() > k ? history.size() - k : 0;
  std::string out;
  for (std::size_t i = start; i < history.size(); ++i) {
    const auto& r = history[i];
    const CircuitParams* before = i > 0 ? &history[i - 1].params : nullptr;
    out += fmt::format("it {} {}{} | {} | {}\n", r.iteration, to_string(r.phase),
                       r.probe ? " probe" : "", change_segment(before, r.params, names),
                       metrics_segment(r));
  }
  out.pop_back();
  return out;
}

std::string format_record_line(const IterationRecord& r) {
  std::string phase = std::string(to_string(r.phase)) + (r.probe ? "*" : "");
  std::vector<std::string> items;
  for (auto m : kAllMetrics) {
    bool pass = true;
    std::optional<ProcessCorner> worst;
    double worst_margin = 0.0;
    for (const auto& [corner, report] : r.reports) {
      if (!worst || report[m].margin_frac < worst_margin) {
        worst = corner;
        worst_margin = report[m].margin_frac;
      }
      pass = pass && report[m].pass;
    }
    if (!worst) continue;
    const auto& e = r.reports.at(*worst)[m];
    items.push_back(fmt::format("{} {}{} {}", to_string(m), format_metric(m, e.value),
                                r.reports.size() > 1 ? fmt::format(" ({})", to_string(*worst)) : "",
                                pass ? "ok" : "FAIL"));
  }
  return fmt::format("it {:>2} {:<7} {} | {}", r.iteration, phase, fmt::join(items, " | "),
                     r.all_pass ? "PASS" : "-");
}

// ----------------------------------------------------------------------------

namespace {

json params_to_json(const CircuitParams& p) {
  json j = json::object();
  json devs = json::array();
  for (const auto& d : p.dev) devs.push_back({{"w", d.w}, {"l", d.l}, {"m", d.m}});
  j["devices"] = devs;
  j["c1"] = p.c1;
  j["cl"] = p.cl;
  return j;
}

CircuitParams params_from_json(const json& j) {
  CircuitParams p;
  const auto& devs = j.at("devices");
  if (!devs.is_array() || devs.size() != kNumRoles) {
    throw Error(ErrorCode::corrupt_record, "params.devices must list 7 devices");
  }
  for (std::size_t i = 0; i < kNumRoles; ++i) {
    p.dev[i] = {devs[i].at("w").get<double>(), devs[i].at("l").get<double>(),
                devs[i].at("m").get<int>()};
  }
  p.c1 = j.at("c1").get<double>();
  p.cl = j.at("cl").get<double>();
  return p;
}

json metrics_to_json(const PerfMetrics& m) {
  return {{"gain_db", m.gain_db}, {"gbw_hz", m.gbw_hz}, {"pm_deg", m.pm_deg},
          {"sr_v_per_us", m.sr_v_per_us}, {"idc_a", m.idc_a}};
}

PerfMetrics metrics_from_json(const json& j) {
  return {j.at("gain_db").get<double>(), j.at("gbw_hz").get<double>(), j.at("pm_deg").get<double>(),
          j.at("sr_v_per_us").get<double>(), j.at("idc_a").get<double>()};
}

ProcessCorner corner_key(const std::string& k) {
  const auto c = parse_corner(k);
  if (!c) throw Error(ErrorCode::corrupt_record, fmt::format("unknown corner '{}'", k));
  return *c;
}

json report_to_json(const EvalReport& r) {
  json j = {{"all_pass", r.all_pass}};
  for (auto m : kAllMetrics) {
    const auto& e = r[m];
    j[std::string(to_string(m))] = {
        {"value", e.value}, {"target", e.target}, {"margin", e.margin_frac}, {"pass", e.pass}};
  }
  return j;
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.all_pass = j.at("all_pass").get<bool>();
  for (auto m : kAllMetrics) {
    const auto& e = j.at(std::string(to_string(m)));
    r.metrics[static_cast<std::size_t>(m)] = {e.at("value").get<double>(), e.at("target").get<double>(),
                                              e.at("margin").get<double>(), e.at("pass").get<bool>()};
  }
  return r;
}

json patch_to_json(const ParamPatch& p) {
  return {{"target", p.target}, {"field", std::string(to_string(p.field))}, {"value", p.value.rendered}};
}

ParamPatch patch_from_json(const json& j) {
  const auto target = j.at("target").get<std::string>();
  const auto field = j.at("field").get<std::string>();
  const auto value = j.at("value").get<std::string>();
  if (field == "W") return ParamPatch::w(target, value);
  if (field == "L") return ParamPatch::l(target, value);
  if (field == "m" || field == "M") return ParamPatch::m(target, static_cast<int>(kv::parse_double(value, "m")));
  if (field == "VALUE") return ParamPatch::cap(target, value);
  throw Error(ErrorCode::corrupt_record, fmt::format("unknown patch field '{}'", field));
}

json stall_to_json(const StallEvidence& s) {
  return {{"kind", std::string(to_string(s.kind))}, {"detail", s.detail}};
}

}  // namespace

std::string record_to_json(const IterationRecord& r) {
  json j;
  j["type"] = "record";
  j["iteration"] = r.iteration;
  j["phase"] = std::string(to_string(r.phase));
  j["probe"] = r.probe;
  j["params"] = params_to_json(r.params);
  json patches = json::array();
  for (const auto& p : r.plan.patches) patches.push_back(patch_to_json(p));
  j["plan"] = {{"observation", r.plan.observation},
               {"thinking", r.plan.thinking},
               {"patches", patches},
               {"done", r.plan.declared_done}};
  json metrics = json::object(), reports = json::object();
  for (const auto& [c, m] : r.metrics) metrics[std::string(to_string(c))] = metrics_to_json(m);
  for (const auto& [c, rep] : r.reports) reports[std::string(to_string(c))] = report_to_json(rep);
  j["metrics"] = metrics;
  j["reports"] = reports;
  j["all_pass"] = r.all_pass;
  j["wall_ms"] = r.wall_ms;
  j["attempts"] = r.attempts;
  j["prompt_ref"] = r.prompt_ref;
  j["reply_ref"] = r.reply_ref;
  return j.dump();
}

IterationRecord record_from_json(std::string_view line) {
  const auto j = json::parse(line);
  if (j.value("type", "") != "record") {
    throw Error(ErrorCode::corrupt_record, "not a record line");
  }
  IterationRecord r;
  r.iteration = j.at("iteration").get<int>();
  const auto phase = j.at("phase").get<std::string>();
  if (phase != "tt" && phase != "corner") {
    throw Error(ErrorCode::corrupt_record, fmt::format("unknown phase '{}'", phase));
  }
  r.phase = phase == "tt" ? Phase::tt : Phase::corner;
  r.probe = j.at("probe").get<bool>();
  r.params = params_from_json(j.at("params"));
  const auto& plan = j.at("plan");
  r.plan.observation = plan.at("observation").get<std::string>();
  r.plan.thinking = plan.at("thinking").get<std::string>();
  for (const auto& p : plan.at("patches")) r.plan.patches.push_back(patch_from_json(p));
  r.plan.declared_done = plan.at("done").get<bool>();
  for (const auto& [k, v] : j.at("metrics").items()) r.metrics[corner_key(k)] = metrics_from_json(v);
  for (const auto& [k, v] : j.at("reports").items()) r.reports[corner_key(k)] = report_from_json(v);
  r.all_pass = j.at("all_pass").get<bool>();
  r.wall_ms = j.at("wall_ms").get<double>();
  r.attempts = j.at("attempts").get<int>();
  r.prompt_ref = j.at("prompt_ref").get<std::string>();
  r.reply_ref = j.at("reply_ref").get<std::string>();
  return r;
}

std::string runlog_header_json() {
  return json{{"schema", "sizer-runlog"}, {"version", kRunLogVersion}}.dump();
}

std::string outcome_to_json(const RunOutcome& outcome) {
  json j = {{"type", "outcome"}, {"status", std::string(to_string(outcome.status))}};
  if (outcome.stall) j["stall"] = stall_to_json(*outcome.stall);
  if (!outcome.error.empty()) j["error"] = outcome.error;
  return j.dump();
}

RunLog::RunLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorCode::io, fmt::format("cannot open run log {}", path_.string()));
  out_ << runlog_header_json() << '\n';
  out_.flush();
}

void RunLog::append(const IterationRecord& r) {
  out_ << record_to_json(r) << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::io, fmt::format("write to {} failed", path_.string()));
}

std::string RunLog::attach(const std::string& name, std::string_view text) {
  auto dir = path_;
  dir += ".d";
  std::filesystem::create_directories(dir);
  kv::write_text(dir / name, text);
  return (dir.filename() / name).string();
}

void RunLog::finish(const RunOutcome& outcome) {
  out_ << outcome_to_json(outcome) << '\n';
  out_.flush();
}

LoadedRun load_run(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, fmt::format("cannot read run log {}", path.string()));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  const bool ends_with_newline = [&] {
    in.clear();
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    if (size <= 0) return true;
    in.seekg(-1, std::ios::end);
    char c = 0;
    in.get(c);
    return c == '\n';
  }();

  LoadedRun run;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    const int line_no = static_cast<int>(i) + 1;
    if (kv::trim(l).empty()) continue;
    const bool last = i + 1 == lines.size();
    try {
      const auto j = json::parse(l);
      if (i == 0) {
        if (j.value("schema", "") != "sizer-runlog") {
          throw Error(ErrorCode::corrupt_record, "missing run-log header");
        }
        if (j.value("version", 0) != kRunLogVersion) {
          throw Error(ErrorCode::corrupt_record,
                      fmt::format("unsupported run-log version {}", j.value("version", 0)));
        }
        continue;
      }
      const auto type = j.value("type", "");
      if (type == "record") {
        run.records.push_back(record_from_json(l));
      } else if (type == "outcome") {
        run.status = parse_run_status(j.value("status", ""));
        if (!run.status) throw Error(ErrorCode::corrupt_record, "unknown outcome status");
        if (j.contains("stall")) {
          const auto kind = j["stall"].value("kind", "");
          StallEvidence s;
          s.kind = kind == "plateau"       ? StallEvidence::Kind::plateau
                   : kind == "oscillation" ? StallEvidence::Kind::oscillation
                   : kind == "gave_up"     ? StallEvidence::Kind::gave_up
                                           : StallEvidence::Kind::cycle;
          s.detail = j["stall"].value("detail", "");
          run.stall = s;
        }
        run.error = j.value("error", "");
      } else {
        throw Error(ErrorCode::corrupt_record, fmt::format("unknown line type '{}'", type));
      }
    } catch (const std::exception& e) {
      if (last && !ends_with_newline) {
        run.warnings.push_back(
            fmt::format("{}:{}: ignoring truncated final line", path.string(), line_no));
        break;
      }
      throw Error(ErrorCode::corrupt_record,
                  fmt::format("{}:{}: corrupt record: {}", path.string(), line_no, e.what()));
    }
  }
  return run;
}

bool recheck_converged(const LoadedRun& run, const SpecSet& specs,
                       const std::vector<ProcessCorner>& corners) {
  if (run.status != RunStatus::converged) return true;
  if (run.records.empty()) return false;
  const auto& last = run.records.back();
  for (auto c : corners) {
    const auto it = last.metrics.find(c);
    if (it == last.metrics.end()) return false;
    if (!evaluate_specs(it->second, specs, EvalMode::corner).all_pass) return false;
  }
  return true;
}

// ----------------------------------------------------------------------------

RecordedEvaluator RecordedEvaluator::load(const std::filesystem::path& path) {
  try {
    return parse(kv::read_text(path));
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

RecordedEvaluator RecordedEvaluator::parse(std::string_view json_text) {
  RecordedEvaluator ev;
  try {
    const auto j = json::parse(json_text);
    for (const auto& e : j.at("entries")) {
      Entry entry;
      entry.params = params_from_json(e.at("params"));
      entry.source = e.value("source", "");
      for (const auto& [k, v] : e.at("corners").items()) {
        entry.corners[corner_key(k)] = metrics_from_json(v);
      }
      ev.entries_.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, fmt::format("recorded metrics: {}", e.what()));
  }
  return ev;
}

PerfMetrics RecordedEvaluator::evaluate(const NetlistDoc&, const CircuitParams& params,
                                        ProcessCorner corner, int iteration) {
  for (const auto& e : entries_) {
    if (!(e.params == params)) continue;
    const auto it = e.corners.find(corner);
    if (it == e.corners.end()) break;
    return it->second;
  }
  throw Error(ErrorCode::config,
              fmt::format("no recorded metrics for the iteration-{} parameters at {}", iteration,
                          to_string(corner)));
}

// ----------------------------------------------------------------------------

namespace {

std::map<ProcessCorner, PerfMetrics> evaluate_corners(Evaluator& ev, const NetlistDoc& doc,
                                                      const CircuitParams& params,
                                                      const std::vector<ProcessCorner>& corners,
                                                      int iteration) {
  std::map<ProcessCorner, PerfMetrics> out;
  if (!ev.concurrent_corners() || corners.size() == 1) {
    for (auto c : corners) out[c] = ev.evaluate(doc, params, c, iteration);
    return out;
  }
  std::vector<std::pair<ProcessCorner, std::future<PerfMetrics>>> jobs;
  for (auto c : corners) {
    jobs.emplace_back(c, std::async(std::launch::async, [&ev, &doc, &params, c, iteration] {
                        return ev.evaluate(doc, params, c, iteration);
                      }));
  }
  std::optional<Error> first_error;
  for (auto& [c, f] : jobs) {
    try {
      out[c] = f.get();
    } catch (const Error& e) {
      if (!first_error) first_error = e;
    }
  }
  if (first_error) throw *first_error;
  return out;
}

std::map<ProcessCorner, EvalReport> make_reports(const std::map<ProcessCorner, PerfMetrics>& metrics,
                                                 const SpecSet& specs, EvalMode mode) {
  std::map<ProcessCorner, EvalReport> out;
  for (const auto& [c, m] : metrics) out[c] = evaluate_specs(m, specs, mode);
  return out;
}

bool all_pass(const std::map<ProcessCorner, EvalReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const auto& kv) { return kv.second.all_pass; });
}

}  // namespace

RunOutcome run_optimization(const RunConfig& config, Strategist& strategist, Evaluator& evaluator,
                            const NetlistDoc& seed, const RecordCallback& on_record,
                            std::string_view fom_formula) {
  config.validate();
  RunOutcome outcome;
  std::optional<RunLog> log;
  if (!config.log_path.empty()) log.emplace(config.log_path);

  NetlistDoc doc = seed;
  Phase phase = Phase::tt;
  int tt_count = 0, corner_count = 0, iteration = 0;
  std::optional<IterationRecord> last;  // results the next strategist call sees
  std::vector<IterationRecord> phase_records;

  auto commit = [&](IterationRecord r) -> IterationRecord {
    if (log) log->append(r);
    outcome.history.push_back(std::move(r));
    if (on_record) on_record(outcome.history.back());
    return outcome.history.back();
  };
  auto finish = [&](RunStatus status) {
    outcome.status = status;
    if (!outcome.history.empty()) {
      const auto& fin = outcome.history.back();
      const auto tt = fin.metrics.find(ProcessCorner::TT);
      if (tt != fin.metrics.end()) {
        try {
          outcome.fom = compute_fom(tt->second, fin.params, fom_formula);
        } catch (const Error& e) {
          if (status != RunStatus::error) {
            outcome.status = RunStatus::error;
            outcome.error = e.what();
          }
        }
      }
    }
    if (log) log->finish(outcome);
    return outcome;
  };

  try {
    CircuitParams params = extract_params(doc, config.names);
    for (;;) {
      if ((phase == Phase::tt ? tt_count >= config.max_tt_iters
                              : corner_count >= config.max_corner_iters)) {
        return finish(RunStatus::iteration_limit);
      }
      IterationContext ctx;
      ctx.iteration = iteration + 1;
      ctx.phase = phase;
      ctx.params = params;
      ctx.specs = config.specs;
      ctx.netlist_text = doc.text();
      if (last) {
        ctx.metrics = last->metrics;
        ctx.reports = last->reports;
        ctx.unmet = collect_unmet(ctx.reports);
      }
      ctx.history_summary = summarize_history(outcome.history, config.history_k, config.specs,
                                              config.names);

      const auto t0 = std::chrono::steady_clock::now();
      StrategistTurn turn = strategist.propose(ctx);
      if (turn.plan.declared_done) {
        outcome.stall = StallEvidence{
            StallEvidence::Kind::gave_up,
            fmt::format("strategist declared done at iteration {} with {} unmet specification(s)",
                        ctx.iteration, ctx.unmet.size())};
        return finish(RunStatus::stalled);
      }

      IterationRecord rec;
      rec.iteration = ++iteration;
      rec.phase = phase;
      rec.plan = turn.plan;
      rec.attempts = turn.attempts;
      if (log) {
        const auto stem = fmt::format("iter{:03}", rec.iteration);
        if (!turn.prompt.empty()) rec.prompt_ref = log->attach(stem + ".prompt.txt", turn.prompt);
        rec.reply_ref = log->attach(stem + ".reply.txt", turn.reply);
        if (!turn.raw.empty()) log->attach(stem + ".exchange.json", turn.raw);
      }

      doc = apply_patches(doc, turn.plan.patches);
      params = extract_params(doc, config.names);
      rec.params = params;
      const std::vector<ProcessCorner> tt_only = {ProcessCorner::TT};
      const auto& corners = phase == Phase::tt ? tt_only : config.corners;
      rec.metrics = evaluate_corners(evaluator, doc, params, corners, rec.iteration);
      rec.reports = make_reports(rec.metrics, config.specs,
                                 phase == Phase::tt ? EvalMode::tt : EvalMode::corner);
      rec.all_pass = all_pass(rec.reports);
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      (phase == Phase::tt ? tt_count : corner_count)++;
      last = commit(std::move(rec));
      phase_records.push_back(*last);

      if (phase == Phase::tt && last->all_pass) {
        IterationRecord probe;
        probe.iteration = last->iteration;
        probe.phase = Phase::corner;
        probe.probe = true;
        probe.params = params;
        const auto p0 = std::chrono::steady_clock::now();
        probe.metrics = evaluate_corners(evaluator, doc, params, config.corners, probe.iteration);
        probe.reports = make_reports(probe.metrics, config.specs, EvalMode::corner);
        probe.all_pass = all_pass(probe.reports);
        probe.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - p0).count();
        last = commit(std::move(probe));
        if (last->all_pass) return finish(RunStatus::converged);
        phase = Phase::corner;
        phase_records.clear();
        continue;
      }
      if (phase == Phase::corner) {
        const auto tt = last->metrics.find(ProcessCorner::TT);
        const bool tt_ok =
            tt == last->metrics.end() || evaluate_specs(tt->second, config.specs, EvalMode::tt).all_pass;
        if (last->all_pass && tt_ok) return finish(RunStatus::converged);
        if (!tt_ok) {
          // A corner fix broke the typical pass: back to the TT phase with TT results.
          last->metrics = {{ProcessCorner::TT, tt->second}};
          last->reports = make_reports(last->metrics, config.specs, EvalMode::tt);
          phase = Phase::tt;
          phase_records.clear();
          continue;
        }
      }
      if (auto s = diagnose_stall(phase_records, config.stall_window, config.plateau_threshold)) {
        outcome.stall = s;
        return finish(RunStatus::stalled);
      }
    }
  } catch (const std::exception& e) {
    outcome.error = e.what();
    return finish(RunStatus::error);
  }
}

}  // namespace sizer
