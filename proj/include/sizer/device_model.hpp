#pragma once

#include <filesystem>

#include "sizer/types.hpp"

namespace sizer {

/// Compact-model constants for one device polarity at one corner.
///
/// `kp` is the transconductance parameter per unit W/L with W and L both in
/// micrometres, `lambda` is channel-length modulation scaled so that the
/// effective value at length L is `lambda / L`.
struct ModelParams {
  double vth0 = 0.40;      // V
  double kp = 150e-6;      // A/V^2
  double n_slope = 1.3;    // subthreshold slope factor
  double lambda = 0.08;    // um/V
  double cox_area = 8.5e-3;  // F/m^2
  double ut = 25.85e-3;    // V

  void validate() const;
};

/// Small-signal operating point per micrometre of gate width.
struct OpPoint {
  double id_per_w = 0.0;   // A/um
  double gm_per_w = 0.0;   // S/um
  double gds_per_w = 0.0;  // S/um
  double cgg_per_w = 0.0;  // F/um
  double gm_over_id = 0.0; // 1/V
  double vov = 0.0;        // V, Vgs - Vth

  friend bool operator==(const OpPoint&, const OpPoint&) = default;
};

/// Base parameters plus the deterministic corner shifts. Loadable from a
/// key=value file, e.g. `nmos.vth0=0.41`, `corner.vth_shift=0.03`.
struct ModelConfig {
  // Synthetic values; pmos kp is 2.5x lower than nmos.
  ModelParams nmos{0.40, 150e-6, 1.3, 0.08, 8.5e-3, 25.85e-3};
  ModelParams pmos{0.45, 60e-6, 1.3, 0.08, 8.5e-3, 25.85e-3};
  double vth_shift = 0.030;  // V, subtracted for fast, added for slow
  double kp_shift = 0.10;    // fraction, added for fast, subtracted for slow
  double overlap_c0 = 0.2;   // overlap allowance added to the 2/3 Cox W L

  static ModelConfig defaults() { return {}; }
  static ModelConfig load(const std::filesystem::path& path);
};

// Modeled domain.
inline constexpr double kMinL = 0.15, kMaxL = 5.0;
inline constexpr double kMinVgs = 0.0, kMaxVgs = 1.8;
inline constexpr double kMaxVds = 1.8;

/// EKV-style smooth weak/strong inversion model. Pure: all members const.
class DeviceModel {
 public:
  explicit DeviceModel(ModelConfig config = ModelConfig::defaults());

  const ModelConfig& config() const { return config_; }

  ModelParams corner_params(DeviceKind kind, ProcessCorner corner) const;

  /// Throws Error{domain} outside L in [0.15, 5] um, Vgs in [0, 1.8] V,
  /// Vds in (0, 1.8] V.
  OpPoint evaluate(DeviceKind kind, ProcessCorner corner, double l_um,
                   double vgs, double vds) const;

  /// Threshold voltage at the corner (used for Vov bookkeeping).
  double vth(DeviceKind kind, ProcessCorner corner) const {
    return corner_params(kind, corner).vth0;
  }

 private:
  ModelConfig config_;
};

/// Free-function forms over the compiled-in defaults.
ModelParams corner_params(DeviceKind kind, ProcessCorner corner);
OpPoint evaluate(DeviceKind kind, ProcessCorner corner, double l_um, double vgs,
                 double vds);

}  // namespace sizer
