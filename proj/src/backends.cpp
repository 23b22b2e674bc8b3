#include "sizer/backends.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "sizer/kv.hpp"

namespace sizer {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double wrap_phase_margin(double pm) {
  while (pm > 180.0) pm -= 360.0;
  while (pm <= -180.0) pm += 360.0;
  return pm;
}

std::vector<std::vector<double>> parse_columns(const std::filesystem::path& path,
                                               std::size_t min_cols, std::size_t max_cols) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::garbled_output,
                fmt::format("simulator output '{}' is missing", path.string()));
  }
  std::istringstream in(kv::read_text(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = kv::split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() < min_cols || toks.size() > max_cols) {
      throw Error(ErrorCode::garbled_output,
                  fmt::format("{}:{}: expected {} columns, got {}", path.string(), line_no,
                              min_cols == max_cols ? std::to_string(min_cols)
                                                   : fmt::format("{}-{}", min_cols, max_cols),
                              toks.size()));
    }
    std::vector<double> row;
    for (auto t : toks) {
      try {
        row.push_back(kv::parse_double(t, "value"));
      } catch (const Error&) {
        throw Error(ErrorCode::garbled_output,
                    fmt::format("{}:{}: non-numeric field '{}'", path.string(), line_no, t));
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw Error(ErrorCode::garbled_output,
                fmt::format("simulator output '{}' has no data rows", path.string()));
  }
  return rows;
}

}  // namespace

DeviceKind role_kind(std::size_t role) {
  switch (role) {
    case 2:
    case 3:
    case 6:
      return DeviceKind::pmos;
    default:
      return DeviceKind::nmos;
  }
}

BiasSolution solve_bias(const CircuitParams& params, const LutSet& luts,
                        ProcessCorner corner, const BiasConfig& config) {
  if (!(config.i_ref > 0.0)) {
    throw Error(ErrorCode::config, "reference current must be positive");
  }
  BiasSolution b;
  b.i_tail = config.i_ref * params.M(5).m;
  b.i_stage2 = config.i_ref * params.M(6).m;
  const double half = 0.5 * b.i_tail;
  b.current = {half, half, half, half, b.i_tail, b.i_stage2, b.i_stage2};

  for (std::size_t i = 0; i < kNumRoles; ++i) {
    const auto& d = params.dev[i];
    const auto& grid = luts.get(role_kind(i), corner);
    const double w_total = d.w * d.m;
    try {
      b.vgs[i] = invert_id_per_w(grid, d.l, b.current[i] / w_total);
    } catch (const Error& e) {
      throw Error(ErrorCode::bias_infeasible,
                  fmt::format("M{} (W={} um x{}, L={} um) cannot carry {:.4g} A at {}: {}",
                              i + 1, d.w, d.m, d.l, b.current[i], to_string(corner),
                              e.what()));
    }
    const auto op = query(grid, d.l, b.vgs[i]);
    b.gm[i] = op.gm_per_w * w_total;
    b.gds[i] = op.gds_per_w * w_total;
  }
  return b;
}

PerfMetrics small_signal_metrics(const SmallSignal& s) {
  PerfMetrics m;
  const double a1 = s.gm1 / (s.gds2 + s.gds4);
  const double a2 = s.gm7 / (s.gds6 + s.gds7);
  m.gain_db = 20.0 * std::log10(a1 * a2);
  m.gbw_hz = s.gm1 / (kTwoPi * s.cc);
  const double f_p2 = s.gm7 / (kTwoPi * s.cl);
  const double f_z = s.gm7 / (kTwoPi * s.cc);  // right-half-plane zero
  m.pm_deg = 90.0 - std::atan(m.gbw_hz / f_p2) * kRadToDeg -
             std::atan(m.gbw_hz / f_z) * kRadToDeg;
  // uA / pF = V/us
  m.sr_v_per_us = std::min((s.i_tail * 1e6) / (s.cc * 1e12), (s.i_stage2 * 1e6) / (s.cl * 1e12));
  m.idc_a = s.i_ref + s.i_tail + s.i_stage2;
  return m;
}

PerfMetrics analytic_evaluate(const CircuitParams& params, const LutSet& luts,
                              ProcessCorner corner, const BiasConfig& config) {
  const auto b = solve_bias(params, luts, corner, config);
  return small_signal_metrics({b.gm[0], b.gm[6], b.gds[1], b.gds[3], b.gds[5], b.gds[6],
                               params.c1, params.cl, config.i_ref, b.i_tail, b.i_stage2});
}

AcMetrics extract_ac_metrics(std::span<const AcPoint> sweep) {
  if (sweep.size() < 2) {
    throw Error(ErrorCode::no_crossing, "AC sweep needs at least two points");
  }
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (!(sweep[i].freq > sweep[i - 1].freq)) {
      throw Error(ErrorCode::non_monotonic,
                  fmt::format("AC sweep frequency not increasing at sample {} ({} Hz)", i,
                              sweep[i].freq));
    }
  }
  AcMetrics out;
  out.gain_db = sweep.front().mag_db;
  for (std::size_t i = 0; i + 1 < sweep.size(); ++i) {
    const auto& a = sweep[i];
    const auto& b = sweep[i + 1];
    if (a.mag_db >= 0.0 && b.mag_db < 0.0) {
      const double t = a.mag_db / (a.mag_db - b.mag_db);
      const double lf = std::log10(a.freq) + t * (std::log10(b.freq) - std::log10(a.freq));
      out.gbw_hz = std::pow(10.0, lf);
      out.pm_deg = wrap_phase_margin(180.0 + a.phase_deg + t * (b.phase_deg - a.phase_deg));
      return out;
    }
  }
  throw Error(ErrorCode::no_crossing,
              fmt::format("magnitude never crosses 0 dB between {} Hz and {} Hz",
                          sweep.front().freq, sweep.back().freq));
}

double extract_sr(std::span<const WavePoint> wave, double v_lo, double v_hi) {
  const double swing = v_hi - v_lo;
  if (!(swing > 0.0) || wave.size() < 2) {
    throw Error(ErrorCode::missing_crossing, "waveform has no rising swing");
  }
  const double l10 = v_lo + 0.1 * swing;
  const double l90 = v_lo + 0.9 * swing;
  const auto crossing = [&](double level, std::size_t from) -> std::pair<double, std::size_t> {
    for (std::size_t i = from; i + 1 < wave.size(); ++i) {
      const auto& a = wave[i];
      const auto& b = wave[i + 1];
      if (a.v < level && b.v >= level) {
        return {a.t + (level - a.v) / (b.v - a.v) * (b.t - a.t), i};
      }
    }
    throw Error(ErrorCode::missing_crossing,
                fmt::format("waveform never rises through {:.4g} V", level));
  };
  const auto [t10, i10] = crossing(l10, 0);
  const auto [t90, i90] = crossing(l90, i10);
  if (!(t90 > t10)) {
    throw Error(ErrorCode::missing_crossing, "10%/90% crossings are not ordered");
  }
  return 0.8 * swing / (t90 - t10) * 1e-6;
}

std::vector<AcPoint> parse_ac_table(const std::filesystem::path& path) {
  std::vector<AcPoint> out;
  for (const auto& r : parse_columns(path, 3, 3)) out.push_back({r[0], r[1], r[2]});
  for (std::size_t i = 1; i < out.size(); ++i) {
    while (out[i].phase_deg - out[i - 1].phase_deg > 180.0) out[i].phase_deg -= 360.0;
    while (out[i].phase_deg - out[i - 1].phase_deg < -180.0) out[i].phase_deg += 360.0;
  }
  return out;
}

std::vector<WavePoint> parse_wave_table(const std::filesystem::path& path) {
  std::vector<WavePoint> out;
  for (const auto& r : parse_columns(path, 2, 2)) out.push_back({r[0], r[1]});
  return out;
}

double parse_op_current(const std::filesystem::path& path) {
  const auto rows = parse_columns(path, 1, 8);
  return std::abs(rows.front().back());
}

std::string control_deck(const SpiceConfig& config) {
  const auto& node = config.output_node;
  std::string out;
  out += "* sizer control deck\n";
  out += ".control\n";
  out += "set wr_singlescale\n";
  out += "op\n";
  out += fmt::format("let idd = -i({})\n", kv::to_lower(config.supply_source));
  out += "wrdata op.out idd\n";
  out += "ac dec 20 10 1g\n";
  out += fmt::format("let gdb = vdb({})\n", node);
  out += fmt::format("let gph = 180/pi*cph(v({}))\n", node);
  out += "wrdata ac.out gdb gph\n";
  out += "tran 0.1n 2u\n";
  out += fmt::format("wrdata tran.out v({})\n", node);
  out += "quit\n";
  out += ".endc\n";
  return out;
}

std::string spice_deck(const NetlistDoc& doc, ProcessCorner corner, const SpiceConfig& config) {
  std::string out;
  for (const auto& line : doc.lines) {
    if (kv::to_lower(kv::trim(line)) == ".end") continue;
    out += line;
    out += '\n';
  }
  const auto inc = config.corner_includes.find(corner);
  if (inc == config.corner_includes.end()) {
    throw Error(ErrorCode::config,
                fmt::format("no model include configured for corner {}", to_string(corner)));
  }
  out += fmt::format(".include \"{}\"\n", inc->second);
  out += control_deck(config);
  out += ".end\n";
  return out;
}

PerfMetrics spice_evaluate(const NetlistDoc& doc, ProcessCorner corner,
                           const SpiceConfig& config, int iteration) {
  namespace fs = std::filesystem;
  const auto workdir = config.work_root / fmt::format("{}-it{:03}-{}", config.run_id, iteration,
                                                      to_string(corner));
  std::error_code ec;
  fs::remove_all(workdir, ec);
  fs::create_directories(workdir);
  kv::write_text(workdir / "deck.cir", spice_deck(doc, corner, config));

  std::vector<std::string> argv{config.command};
  argv.insert(argv.end(), config.extra_args.begin(), config.extra_args.end());
  argv.push_back("-b");
  argv.push_back("deck.cir");
  const auto res = run_process(argv, workdir, config.timeout);
  if (res.exit_code != 0) {
    throw Error(ErrorCode::process_failed,
                fmt::format("'{}' exited with status {} (workdir {}): {}", config.command,
                            res.exit_code, workdir.string(), kv::trim(res.stderr_text)));
  }

  const auto ac = parse_ac_table(workdir / "ac.out");
  const auto tran = parse_wave_table(workdir / "tran.out");
  const double idc = parse_op_current(workdir / "op.out");
  PerfMetrics m;
  try {
    const auto acm = extract_ac_metrics(ac);
    m.gain_db = acm.gain_db;
    m.gbw_hz = acm.gbw_hz;
    m.pm_deg = acm.pm_deg;
    const auto [lo, hi] = std::minmax_element(
        tran.begin(), tran.end(), [](const auto& a, const auto& b) { return a.v < b.v; });
    m.sr_v_per_us = extract_sr(tran, lo->v, hi->v);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{} (workdir {})", e.what(), workdir.string()));
  }
  m.idc_a = idc;
  fs::remove_all(workdir, ec);
  return m;
}

}  // namespace sizer
