#include "sizer/gmid_lut.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <fmt/format.h>

#include "sizer/kv.hpp"

namespace sizer {

namespace {

struct AxisPos {
  std::size_t index = 0;  // lower bracketing node
  double t = 0.0;         // weight of the upper node
  bool on_node = false;
  std::size_t node = 0;
};

AxisPos locate(const std::vector<double>& axis, double x, bool log_scale) {
  AxisPos pos;
  const auto it = std::lower_bound(axis.begin(), axis.end(), x);
  if (it != axis.end() && *it == x) {
    pos.on_node = true;
    pos.node = static_cast<std::size_t>(it - axis.begin());
    pos.index = std::min(pos.node, axis.size() - 2);
    pos.t = pos.node == pos.index ? 0.0 : 1.0;
    return pos;
  }
  pos.index = static_cast<std::size_t>(it - axis.begin()) - 1;
  const double a = axis[pos.index];
  const double b = axis[pos.index + 1];
  pos.t = log_scale ? (std::log(x) - std::log(a)) / (std::log(b) - std::log(a))
                    : (x - a) / (b - a);
  return pos;
}

void check_hull(const std::vector<double>& axis, double x, std::string_view name) {
  if (!(x >= axis.front() && x <= axis.back())) {
    throw Error(ErrorCode::out_of_range,
                fmt::format("{}={} outside LUT hull [{}, {}]", name, x, axis.front(),
                            axis.back()));
  }
}

double log_lerp2(double q00, double q01, double q10, double q11, double tl, double tv) {
  const double row0 = (1.0 - tv) * std::log(q00) + tv * std::log(q01);
  const double row1 = (1.0 - tv) * std::log(q10) + tv * std::log(q11);
  return std::exp((1.0 - tl) * row0 + tl * row1);
}

double lerp2(double q00, double q01, double q10, double q11, double tl, double tv) {
  const double row0 = (1.0 - tv) * q00 + tv * q01;
  const double row1 = (1.0 - tv) * q10 + tv * q11;
  return (1.0 - tl) * row0 + tl * row1;
}

void check_axis(const std::vector<double>& axis, std::string_view name) {
  if (axis.size() < 4) {
    throw Error(ErrorCode::format,
                fmt::format("{} needs at least 4 points, has {}", name, axis.size()));
  }
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i])) {
      throw Error(ErrorCode::format, fmt::format("{}[{}] is not finite", name, i));
    }
    if (i > 0 && !(axis[i] > axis[i - 1])) {
      throw Error(ErrorCode::format,
                  fmt::format("{} not strictly increasing at index {}", name, i));
    }
  }
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string join_axis(const std::vector<double>& axis) {
  std::string out;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (i > 0) out += ',';
    out += shortest(axis[i]);
  }
  return out;
}

std::vector<double> parse_axis(std::string_view text, std::string_view name) {
  std::vector<double> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(kv::parse_double(text.substr(0, comma), name));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string_view expect_key(std::string_view line, std::string_view key) {
  if (line.size() <= key.size() || line.substr(0, key.size()) != key ||
      line[key.size()] != '=') {
    throw Error(ErrorCode::format,
                fmt::format("expected '{}=' header line, got '{}'", key, line));
  }
  return line.substr(key.size() + 1);
}

}  // namespace

std::vector<double> default_vgs_axis() {
  std::vector<double> axis;
  for (int i = 0; i <= 50; ++i) axis.push_back((200.0 + 20.0 * i) / 1000.0);
  return axis;
}

void LutGrid::validate() const {
  check_axis(l_axis, "l_axis");
  check_axis(vgs_axis, "vgs_axis");
  if (cells.size() != l_axis.size() * vgs_axis.size()) {
    throw Error(ErrorCode::format,
                fmt::format("shape mismatch: {} cells for {}x{} axes", cells.size(),
                            l_axis.size(), vgs_axis.size()));
  }
  for (std::size_t il = 0; il < l_axis.size(); ++il) {
    for (std::size_t iv = 0; iv < vgs_axis.size(); ++iv) {
      const auto& c = at(il, iv);
      for (double q : {c.id_per_w, c.gm_per_w, c.gds_per_w, c.cgg_per_w, c.gm_over_id}) {
        if (!std::isfinite(q) || !(q > 0.0)) {
          throw Error(ErrorCode::format,
                      fmt::format("cell (L={}, Vgs={}) has a non-positive or non-finite value",
                                  l_axis[il], vgs_axis[iv]));
        }
      }
      if (iv > 0 && !(c.gm_over_id < at(il, iv - 1).gm_over_id)) {
        throw Error(ErrorCode::format,
                    fmt::format("gm/Id not decreasing along L={} at Vgs={}", l_axis[il],
                                vgs_axis[iv]));
      }
    }
  }
}

LutGrid build_lut(const DeviceEvaluator& evaluator, DeviceKind kind, ProcessCorner corner,
                  std::vector<double> l_axis, std::vector<double> vgs_axis, double vds,
                  double vth) {
  check_axis(l_axis, "l_axis");
  check_axis(vgs_axis, "vgs_axis");
  LutGrid grid;
  grid.kind = kind;
  grid.corner = corner;
  grid.vds = vds;
  grid.vth = vth;
  grid.l_axis = std::move(l_axis);
  grid.vgs_axis = std::move(vgs_axis);
  grid.cells.reserve(grid.l_axis.size() * grid.vgs_axis.size());
  for (double l : grid.l_axis) {
    for (double vgs : grid.vgs_axis) {
      try {
        grid.cells.push_back(evaluator(kind, corner, l, vgs, vds));
      } catch (const Error& e) {
        throw Error(e.code(), fmt::format("building {} {} LUT at L={}, Vgs={}: {}",
                                          to_string(kind), to_string(corner), l, vgs,
                                          e.what()));
      }
    }
  }
  return grid;
}

LutGrid build_lut(const DeviceModel& model, DeviceKind kind, ProcessCorner corner) {
  const auto eval = [&model](DeviceKind k, ProcessCorner c, double l, double vgs,
                             double vds) { return model.evaluate(k, c, l, vgs, vds); };
  return build_lut(eval, kind, corner, kDefaultLAxis, default_vgs_axis(), kDefaultLutVds,
                   model.vth(kind, corner));
}

OpPoint query(const LutGrid& grid, double l_um, double vgs) {
  check_hull(grid.l_axis, l_um, "L");
  check_hull(grid.vgs_axis, vgs, "Vgs");
  const auto pl = locate(grid.l_axis, l_um, true);
  const auto pv = locate(grid.vgs_axis, vgs, false);
  if (pl.on_node && pv.on_node) return grid.at(pl.node, pv.node);

  const auto& c00 = grid.at(pl.index, pv.index);
  const auto& c01 = grid.at(pl.index, pv.index + 1);
  const auto& c10 = grid.at(pl.index + 1, pv.index);
  const auto& c11 = grid.at(pl.index + 1, pv.index + 1);
  const double tl = pl.t, tv = pv.t;

  OpPoint op;
  op.id_per_w = log_lerp2(c00.id_per_w, c01.id_per_w, c10.id_per_w, c11.id_per_w, tl, tv);
  op.gm_per_w = log_lerp2(c00.gm_per_w, c01.gm_per_w, c10.gm_per_w, c11.gm_per_w, tl, tv);
  op.gds_per_w =
      log_lerp2(c00.gds_per_w, c01.gds_per_w, c10.gds_per_w, c11.gds_per_w, tl, tv);
  op.cgg_per_w =
      log_lerp2(c00.cgg_per_w, c01.cgg_per_w, c10.cgg_per_w, c11.cgg_per_w, tl, tv);
  op.vov = lerp2(c00.vov, c01.vov, c10.vov, c11.vov, tl, tv);
  op.gm_over_id = op.gm_per_w / op.id_per_w;
  return op;
}

std::pair<double, double> ratio_range(const LutGrid& grid, double l_um) {
  const double hi = query(grid, l_um, grid.vgs_axis.front()).gm_over_id;
  const double lo = query(grid, l_um, grid.vgs_axis.back()).gm_over_id;
  return {lo, hi};
}

double invert_gm_over_id(const LutGrid& grid, double l_um, double target_ratio) {
  const auto [lo_ratio, hi_ratio] = ratio_range(grid, l_um);
  if (!(target_ratio >= lo_ratio && target_ratio <= hi_ratio)) {
    throw Error(ErrorCode::unreachable,
                fmt::format("gm/Id={} 1/V unreachable at L={} um; achievable [{:.4g}, {:.4g}]",
                            target_ratio, l_um, lo_ratio, hi_ratio));
  }
  // ratio decreases with Vgs
  double lo = grid.vgs_axis.front(), hi = grid.vgs_axis.back();
  double mid = lo;
  for (int i = 0; i < 200; ++i) {
    mid = 0.5 * (lo + hi);
    const double r = query(grid, l_um, mid).gm_over_id;
    if (std::abs(r - target_ratio) <= 1e-10 * target_ratio || hi - lo < 1e-13) break;
    if (r > target_ratio) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

double invert_id_per_w(const LutGrid& grid, double l_um, double id_per_w) {
  double lo = grid.vgs_axis.front(), hi = grid.vgs_axis.back();
  const double id_lo = query(grid, l_um, lo).id_per_w;
  const double id_hi = query(grid, l_um, hi).id_per_w;
  if (!(id_per_w >= id_lo && id_per_w <= id_hi)) {
    throw Error(ErrorCode::bias_infeasible,
                fmt::format("current density {:.4g} A/um outside [{:.4g}, {:.4g}] at L={} um "
                            "({} {})",
                            id_per_w, id_lo, id_hi, l_um, to_string(grid.kind),
                            to_string(grid.corner)));
  }
  double mid = lo;
  for (int i = 0; i < 200; ++i) {
    mid = 0.5 * (lo + hi);
    const double id = query(grid, l_um, mid).id_per_w;
    if (std::abs(id - id_per_w) <= 1e-10 * id_per_w || hi - lo < 1e-13) break;
    if (id < id_per_w) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

SizingResult size_for_gm(const LutGrid& grid, double l_um, double target_gm,
                         double id_budget, double max_width_um) {
  if (!(target_gm > 0.0) || !(id_budget > 0.0)) {
    throw Error(ErrorCode::domain,
                fmt::format("size_for_gm needs positive gm and current (gm={}, id={})",
                            target_gm, id_budget));
  }
  SizingResult r;
  r.vgs = invert_gm_over_id(grid, l_um, target_gm / id_budget);
  const auto op = query(grid, l_um, r.vgs);
  r.w = id_budget / op.id_per_w;
  if (r.w > max_width_um) {
    throw Error(ErrorCode::width_limit,
                fmt::format("required W={:.4g} um exceeds the {:.4g} um limit", r.w,
                            max_width_um));
  }
  r.vov = op.vov;
  r.achieved_gm = op.gm_per_w * r.w;
  r.achieved_id = op.id_per_w * r.w;
  return r;
}

std::string serialize(const LutGrid& grid) {
  std::string out;
  out += "gmidlut v1\n";
  out += fmt::format("kind={}\n", to_string(grid.kind));
  out += fmt::format("corner={}\n", to_string(grid.corner));
  out += fmt::format("vds={}\n", shortest(grid.vds));
  out += fmt::format("vth={}\n", shortest(grid.vth));
  out += fmt::format("l_axis={}\n", join_axis(grid.l_axis));
  out += fmt::format("vgs_axis={}\n", join_axis(grid.vgs_axis));
  for (const auto& c : grid.cells) {
    out += fmt::format("{:.8e} {:.8e} {:.8e} {:.8e}\n", c.id_per_w, c.gm_per_w,
                       c.gds_per_w, c.cgg_per_w);
  }
  return out;
}

LutGrid deserialize(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    lines.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  if (lines.size() < 7) {
    throw Error(ErrorCode::format, "LUT file truncated before the cell table");
  }
  if (lines[0] != "gmidlut v1") {
    throw Error(ErrorCode::format,
                fmt::format("unsupported LUT header '{}', expected 'gmidlut v1'", lines[0]));
  }
  LutGrid g;
  const auto kind = parse_device_kind(expect_key(lines[1], "kind"));
  const auto corner = parse_corner(expect_key(lines[2], "corner"));
  if (!kind || !corner) throw Error(ErrorCode::format, "bad kind/corner in LUT header");
  g.kind = *kind;
  g.corner = *corner;
  g.vds = kv::parse_double(expect_key(lines[3], "vds"), "vds");
  g.vth = kv::parse_double(expect_key(lines[4], "vth"), "vth");
  g.l_axis = parse_axis(expect_key(lines[5], "l_axis"), "l_axis");
  g.vgs_axis = parse_axis(expect_key(lines[6], "vgs_axis"), "vgs_axis");
  check_axis(g.l_axis, "l_axis");
  check_axis(g.vgs_axis, "vgs_axis");

  const std::size_t expected = g.l_axis.size() * g.vgs_axis.size();
  std::size_t n_cells = lines.size() - 7;
  if (n_cells > 0 && lines.back().empty()) --n_cells;
  if (n_cells != expected) {
    throw Error(ErrorCode::format,
                fmt::format("shape mismatch: {} cell lines for {}x{} axes", n_cells,
                            g.l_axis.size(), g.vgs_axis.size()));
  }
  g.cells.reserve(expected);
  for (std::size_t k = 0; k < expected; ++k) {
    const auto toks = kv::split_ws(lines[7 + k]);
    if (toks.size() != 4) {
      throw Error(ErrorCode::format,
                  fmt::format("line {}: expected 4 columns, got {}", 8 + k, toks.size()));
    }
    OpPoint c;
    c.id_per_w = kv::parse_double(toks[0], "id");
    c.gm_per_w = kv::parse_double(toks[1], "gm");
    c.gds_per_w = kv::parse_double(toks[2], "gds");
    c.cgg_per_w = kv::parse_double(toks[3], "cgg");
    c.gm_over_id = c.gm_per_w / c.id_per_w;
    c.vov = g.vgs_axis[k % g.vgs_axis.size()] - g.vth;
    g.cells.push_back(c);
  }
  g.validate();
  return g;
}

void LutSet::insert(LutGrid grid) {
  const auto key = std::make_pair(grid.kind, grid.corner);
  grids_.insert_or_assign(key, std::move(grid));
}

bool LutSet::contains(DeviceKind kind, ProcessCorner corner) const {
  return grids_.count({kind, corner}) != 0;
}

const LutGrid& LutSet::get(DeviceKind kind, ProcessCorner corner) const {
  const auto it = grids_.find({kind, corner});
  if (it == grids_.end()) {
    throw Error(ErrorCode::config, fmt::format("no {} LUT for corner {}", to_string(kind),
                                               to_string(corner)));
  }
  return it->second;
}

LutSet LutSet::build(const DeviceModel& model, std::span<const ProcessCorner> corners) {
  LutSet set;
  for (auto corner : corners) {
    for (auto kind : kAllKinds) set.insert(build_lut(model, kind, corner));
  }
  return set;
}

LutSet LutSet::load_dir(const std::string& dir) {
  LutSet set;
  for (auto corner : kAllCorners) {
    for (auto kind : kAllKinds) {
      const auto path = std::filesystem::path(dir) / file_name(kind, corner);
      if (!std::filesystem::exists(path)) continue;
      try {
        set.insert(deserialize(kv::read_text(path)));
      } catch (const Error& e) {
        throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
      }
    }
  }
  if (set.size() == 0) {
    throw Error(ErrorCode::config, fmt::format("no LUT files found in '{}'", dir));
  }
  return set;
}

std::string LutSet::file_name(DeviceKind kind, ProcessCorner corner) {
  return fmt::format("{}_{}.lut", to_string(kind), to_string(corner));
}

}  // namespace sizer
