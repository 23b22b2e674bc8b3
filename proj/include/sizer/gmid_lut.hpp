#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sizer/device_model.hpp"
#include "sizer/types.hpp"

namespace sizer {

using DeviceEvaluator =
    std::function<OpPoint(DeviceKind, ProcessCorner, double l_um, double vgs, double vds)>;

/// Unit-width operating points over (L, Vgs) at a fixed Vds for one device
/// polarity and corner. Cells are stored L-major.
struct LutGrid {
  DeviceKind kind = DeviceKind::nmos;
  ProcessCorner corner = ProcessCorner::TT;
  double vds = 0.9;
  double vth = 0.0;  // threshold used for the Vov column
  std::vector<double> l_axis;
  std::vector<double> vgs_axis;
  std::vector<OpPoint> cells;

  const OpPoint& at(std::size_t il, std::size_t iv) const {
    return cells[il * vgs_axis.size() + iv];
  }

  /// Checks axis ordering, shape, positivity and per-row gm/Id monotonicity.
  /// Throws Error{format}.
  void validate() const;
};

inline const std::vector<double> kDefaultLAxis = {0.18, 0.25, 0.35, 0.5,
                                                  0.75, 1.0,  1.5,  2.0};
std::vector<double> default_vgs_axis();  // 0.20 .. 1.20 step 0.02
inline constexpr double kDefaultLutVds = 0.9;
inline constexpr double kDefaultMaxWidth = 500.0;  // um

struct SizingResult {
  double w = 0.0;            // um (total width)
  double vgs = 0.0;          // V
  double vov = 0.0;          // V
  double achieved_gm = 0.0;  // S
  double achieved_id = 0.0;  // A
};

LutGrid build_lut(const DeviceEvaluator& evaluator, DeviceKind kind,
                  ProcessCorner corner, std::vector<double> l_axis,
                  std::vector<double> vgs_axis, double vds, double vth);

/// Default axes over the compact model.
LutGrid build_lut(const DeviceModel& model, DeviceKind kind, ProcessCorner corner);

/// Interpolated operating point. Each stored quantity is interpolated
/// bilinearly in (ln L, Vgs) on a log scale (Vov linearly); gm/Id is then
/// recomputed from the interpolated gm and Id. Grid nodes return the stored
/// cell verbatim. Throws Error{out_of_range}.
OpPoint query(const LutGrid& grid, double l_um, double vgs);

/// Achievable gm/Id range at length L, as {min, max}.
std::pair<double, double> ratio_range(const LutGrid& grid, double l_um);

/// Vgs whose interpolated gm/Id equals `target_ratio` within 1e-4 relative.
/// Throws Error{unreachable} with the achievable range.
double invert_gm_over_id(const LutGrid& grid, double l_um, double target_ratio);

/// Vgs at which the interpolated Id/W equals `id_per_w`.
/// Throws Error{bias_infeasible} when outside the Vgs hull.
double invert_id_per_w(const LutGrid& grid, double l_um, double id_per_w);

SizingResult size_for_gm(const LutGrid& grid, double l_um, double target_gm,
                         double id_budget, double max_width_um = kDefaultMaxWidth);

std::string serialize(const LutGrid& grid);
LutGrid deserialize(std::string_view text);

/// LUTs keyed by (kind, corner).
class LutSet {
 public:
  void insert(LutGrid grid);
  bool contains(DeviceKind kind, ProcessCorner corner) const;
  /// Throws Error{config} when the table is missing.
  const LutGrid& get(DeviceKind kind, ProcessCorner corner) const;
  std::size_t size() const { return grids_.size(); }

  static LutSet build(const DeviceModel& model, std::span<const ProcessCorner> corners);
  static LutSet load_dir(const std::string& dir);
  static std::string file_name(DeviceKind kind, ProcessCorner corner);

 private:
  std::map<std::pair<DeviceKind, ProcessCorner>, LutGrid> grids_;
};

}  // namespace sizer
