#include "sizer/specs.hpp"

#include <sstream>

#include <fmt/format.h>

#include "sizer/kv.hpp"

namespace sizer {

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::GAIN: return "GAIN";
    case Metric::GBW: return "GBW";
    case Metric::PM: return "PM";
    case Metric::SR: return "SR";
    case Metric::IDC: return "IDC";
  }
  return "?";
}

std::string_view to_string(Direction d) {
  return d == Direction::at_least ? "at_least" : "at_most";
}

std::optional<Metric> parse_metric(std::string_view text) {
  const auto up = kv::to_upper(text);
  for (auto m : kAllMetrics) {
    if (to_string(m) == up) return m;
  }
  return std::nullopt;
}

double metric_value(const PerfMetrics& pm, Metric m) {
  switch (m) {
    case Metric::GAIN: return pm.gain_db;
    case Metric::GBW: return pm.gbw_hz;
    case Metric::PM: return pm.pm_deg;
    case Metric::SR: return pm.sr_v_per_us;
    case Metric::IDC: return pm.idc_a;
  }
  return 0.0;
}

std::string format_metric(Metric m, double v) {
  switch (m) {
    case Metric::GAIN: return fmt::format("{:.2f} dB", v);
    case Metric::GBW: return fmt::format("{:.2f} MHz", v * 1e-6);
    case Metric::PM: return fmt::format("{:.2f} deg", v);
    case Metric::SR: return fmt::format("{:.2f} V/us", v);
    case Metric::IDC: return fmt::format("{:.1f} uA", v * 1e6);
  }
  return "?";
}

SpecSet SpecSet::defaults() {
  SpecSet s;
  s[Metric::GAIN] = {Metric::GAIN, Direction::at_least, 60.0, 0.90};
  s[Metric::GBW] = {Metric::GBW, Direction::at_least, 20e6, 0.95};
  s[Metric::PM] = {Metric::PM, Direction::at_least, 60.0, 0.90};
  s[Metric::SR] = {Metric::SR, Direction::at_least, 20.0, 0.90};
  s[Metric::IDC] = {Metric::IDC, Direction::at_most, 200e-6, 1.20};
  return s;
}

SpecSet SpecSet::load(const std::filesystem::path& path) {
  try {
    return parse(kv::read_text(path));
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

SpecSet SpecSet::parse(std::string_view text) {
  SpecSet s = defaults();
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto pairs = kv::parse_line(line, line_no);
    if (pairs.empty()) continue;
    std::optional<Metric> metric;
    std::optional<Direction> dir;
    std::optional<double> target, factor;
    for (const auto& [k, v] : pairs) {
      if (k == "metric") {
        metric = parse_metric(v);
        if (!metric) throw Error(ErrorCode::format, fmt::format("line {}: unknown metric '{}'", line_no, v));
      } else if (k == "direction") {
        if (v == "at_least") dir = Direction::at_least;
        else if (v == "at_most") dir = Direction::at_most;
        else throw Error(ErrorCode::format, fmt::format("line {}: bad direction '{}'", line_no, v));
      } else if (k == "tt_target") {
        target = parse_eng(v);
      } else if (k == "corner_factor") {
        factor = kv::parse_double(v, "corner_factor");
      } else {
        throw Error(ErrorCode::format, fmt::format("line {}: unknown key '{}'", line_no, k));
      }
    }
    if (!metric || !dir || !target || !factor) {
      throw Error(ErrorCode::format,
                  fmt::format("line {}: needs metric, direction, tt_target, corner_factor", line_no));
    }
    if (!(*factor > 0.0)) {
      throw Error(ErrorCode::format, fmt::format("line {}: corner_factor must be > 0", line_no));
    }
    s[*metric] = {*metric, *dir, *target, *factor};
  }
  return s;
}

std::string SpecSet::serialize() const {
  std::string out;
  for (const auto& it : items) {
    out += fmt::format("metric={} direction={} tt_target={} corner_factor={}\n",
                       to_string(it.metric), to_string(it.direction), format_eng(it.tt_target),
                       it.corner_factor);
  }
  return out;
}

EvalReport evaluate_specs(const PerfMetrics& metrics, const SpecSet& specs, EvalMode mode) {
  EvalReport r;
  r.all_pass = true;
  for (auto m : kAllMetrics) {
    const auto& item = specs[m];
    auto& e = r.metrics[static_cast<std::size_t>(m)];
    e.value = metric_value(metrics, m);
    e.target = mode == EvalMode::tt ? item.tt_target : item.corner_target();
    if (item.direction == Direction::at_least) {
      e.pass = e.value >= e.target;
      e.margin_frac = (e.value - e.target) / e.target;
    } else {
      e.pass = e.value <= e.target;
      e.margin_frac = (e.target - e.value) / e.target;
    }
    r.all_pass = r.all_pass && e.pass;
  }
  return r;
}

std::array<double, 5> derated_targets(const SpecSet& specs) {
  std::array<double, 5> out{};
  for (auto m : kAllMetrics) out[static_cast<std::size_t>(m)] = specs[m].corner_target();
  return out;
}

std::array<WorstEntry, 5> worst_case(const std::map<ProcessCorner, PerfMetrics>& per_corner,
                                     const SpecSet& specs) {
  if (per_corner.empty()) throw Error(ErrorCode::empty_input, "worst_case needs at least one corner");
  std::array<WorstEntry, 5> out{};
  for (auto m : kAllMetrics) {
    const bool lower_is_worse = specs[m].direction == Direction::at_least;
    std::optional<WorstEntry> worst;
    for (auto corner : kAllCorners) {
      const auto it = per_corner.find(corner);
      if (it == per_corner.end()) continue;
      const double v = metric_value(it->second, m);
      if (!worst || (lower_is_worse ? v < worst->value : v > worst->value)) {
        worst = WorstEntry{v, corner};
      }
    }
    out[static_cast<std::size_t>(m)] = *worst;
  }
  return out;
}

FomReport compute_fom(const PerfMetrics& metrics, const CircuitParams& params,
                      std::string_view formula) {
  FomReport r;
  r.formula = std::string(formula);
  const double cl_pf = params.cl * 1e12;
  const double idc_ma = metrics.idc_a * 1e3;
  if (formula == "gbw_cl_over_idc") {
    r.fom = metrics.gbw_hz * 1e-6 * cl_pf / idc_ma;
  } else if (formula == "sr_cl_over_idc") {
    r.fom = metrics.sr_v_per_us * cl_pf / idc_ma;
  } else {
    throw Error(ErrorCode::unknown_formula,
                fmt::format("unknown FOM formula '{}' (known: gbw_cl_over_idc, sr_cl_over_idc)",
                            formula));
  }
  r.area_um2 = params.gate_area_um2();
  r.foma = foma_of(r.fom, r.area_um2);
  return r;
}

std::string format_report_table(const EvalReport& report) {
  std::string out = fmt::format("{:<6} {:>16} {:>16} {:>9}  {}\n", "Metric", "Target", "Result",
                                "Margin", "Status");
  for (auto m : kAllMetrics) {
    const auto& e = report[m];
    const auto dir = m == Metric::IDC ? "< " : "> ";
    out += fmt::format("{:<6} {:>16} {:>16} {:>+8.1f}%  {}\n", to_string(m),
                       dir + format_metric(m, e.target), format_metric(m, e.value),
                       e.margin_frac * 100.0, e.pass ? "pass" : "FAIL");
  }
  return out;
}

}  // namespace sizer
