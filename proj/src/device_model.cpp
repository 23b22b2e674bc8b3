#include "sizer/device_model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sizer/kv.hpp"

namespace sizer {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

enum class Speed { typical, fast, slow };

Speed speed_of(DeviceKind kind, ProcessCorner corner) {
  switch (corner) {
    case ProcessCorner::TT: return Speed::typical;
    case ProcessCorner::FF: return Speed::fast;
    case ProcessCorner::SS: return Speed::slow;
    case ProcessCorner::FS:
      return kind == DeviceKind::nmos ? Speed::fast : Speed::slow;
    case ProcessCorner::SF:
      return kind == DeviceKind::nmos ? Speed::slow : Speed::fast;
  }
  return Speed::typical;
}

void apply_key(ModelConfig& cfg, const std::string& key, double v) {
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    const auto head = key.substr(0, dot);
    const auto field = key.substr(dot + 1);
    if (head == "nmos" || head == "pmos") {
      auto& p = head == "nmos" ? cfg.nmos : cfg.pmos;
      if (field == "vth0") { p.vth0 = v; return; }
      if (field == "kp") { p.kp = v; return; }
      if (field == "n_slope") { p.n_slope = v; return; }
      if (field == "lambda") { p.lambda = v; return; }
      if (field == "cox_area") { p.cox_area = v; return; }
    }
    if (head == "corner") {
      if (field == "vth_shift") { cfg.vth_shift = v; return; }
      if (field == "kp_shift") { cfg.kp_shift = v; return; }
    }
    if (key == "overlap.c0") { cfg.overlap_c0 = v; return; }
  }
  throw Error(ErrorCode::config, fmt::format("unknown model config key '{}'", key));
}

}  // namespace

void ModelParams::validate() const {
  if (!(kp > 0.0) || !(n_slope >= 1.0) || !(lambda >= 0.0) || !(cox_area > 0.0) ||
      !(ut > 0.0) || !std::isfinite(vth0)) {
    throw Error(ErrorCode::config,
                fmt::format("invalid model params (vth0={}, kp={}, n={}, lambda={}, cox={})",
                            vth0, kp, n_slope, lambda, cox_area));
  }
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
  ModelConfig cfg;
  for (const auto& [key, value] : kv::read_file(path)) {
    apply_key(cfg, key, kv::parse_double(value, key));
  }
  cfg.nmos.validate();
  cfg.pmos.validate();
  return cfg;
}

DeviceModel::DeviceModel(ModelConfig config) : config_(std::move(config)) {
  config_.nmos.validate();
  config_.pmos.validate();
}

ModelParams DeviceModel::corner_params(DeviceKind kind, ProcessCorner corner) const {
  ModelParams p = kind == DeviceKind::nmos ? config_.nmos : config_.pmos;
  switch (speed_of(kind, corner)) {
    case Speed::typical:
      break;
    case Speed::fast:
      p.vth0 -= config_.vth_shift;
      p.kp *= 1.0 + config_.kp_shift;
      break;
    case Speed::slow:
      p.vth0 += config_.vth_shift;
      p.kp *= 1.0 - config_.kp_shift;
      break;
  }
  return p;
}

OpPoint DeviceModel::evaluate(DeviceKind kind, ProcessCorner corner, double l_um,
                              double vgs, double vds) const {
  if (!(l_um >= kMinL && l_um <= kMaxL)) {
    throw Error(ErrorCode::domain,
                fmt::format("L={} um outside [{}, {}]", l_um, kMinL, kMaxL));
  }
  if (!(vgs >= kMinVgs && vgs <= kMaxVgs)) {
    throw Error(ErrorCode::domain,
                fmt::format("Vgs={} V outside [{}, {}]", vgs, kMinVgs, kMaxVgs));
  }
  if (!(vds > 0.0 && vds <= kMaxVds)) {
    throw Error(ErrorCode::domain, fmt::format("Vds={} V outside (0, {}]", vds, kMaxVds));
  }
  const auto p = corner_params(kind, corner);
  const double x = (vgs - p.vth0) / (2.0 * p.n_slope * p.ut);
  const double sp = softplus(x);
  const double lambda_eff = p.lambda / l_um;
  const double clm = 1.0 + lambda_eff * vds;
  const double beta = p.kp / l_um;

  OpPoint op;
  op.id_per_w = 2.0 * p.n_slope * beta * p.ut * p.ut * sp * sp * clm;
  // d/dVgs of sp^2 is 2 sp sigmoid(x) / (2 n ut).
  op.gm_per_w = 2.0 * beta * p.ut * sp * sigmoid(x) * clm;
  op.gds_per_w = op.id_per_w * lambda_eff / clm;
  op.cgg_per_w = p.cox_area * l_um * 1e-12 * (2.0 / 3.0 + config_.overlap_c0);
  op.gm_over_id = op.gm_per_w / op.id_per_w;
  op.vov = vgs - p.vth0;
  return op;
}

ModelParams corner_params(DeviceKind kind, ProcessCorner corner) {
  static const DeviceModel model;
  return model.corner_params(kind, corner);
}

OpPoint evaluate(DeviceKind kind, ProcessCorner corner, double l_um, double vgs,
                 double vds) {
  static const DeviceModel model;
  return model.evaluate(kind, corner, l_um, vgs, vds);
}

}  // namespace sizer
