#include <cmath>

#include <gtest/gtest.h>

#include "sizer/device_model.hpp"
#include "sizer/kv.hpp"
#include "support.hpp"

using namespace sizer;

namespace {

const DeviceModel kModel;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(DeviceModel, WeakInversionRatioApproachesSubthresholdLimit) {
  for (auto kind : kAllKinds) {
    const auto p = kModel.corner_params(kind, ProcessCorner::TT);
    const double limit = 1.0 / (p.n_slope * p.ut);
    const auto op = kModel.evaluate(kind, ProcessCorner::TT, 0.5, p.vth0 - 0.35, 0.9);
    EXPECT_LT(rel(op.gm_over_id, limit), 0.01) << to_string(kind);
    EXPECT_LT(op.gm_over_id, limit);
  }
}

TEST(DeviceModel, StrongInversionFollowsSquareLaw) {
  const auto p = kModel.corner_params(DeviceKind::nmos, ProcessCorner::TT);
  const double l = 1.0, vov = 0.7, vds = 0.9;
  const auto op = kModel.evaluate(DeviceKind::nmos, ProcessCorner::TT, l, p.vth0 + vov, vds);
  const double clm = 1.0 + p.lambda / l * vds;
  const double square = p.kp / l * vov * vov / (2.0 * p.n_slope) * clm;
  EXPECT_LT(rel(op.id_per_w, square), 0.02);
  EXPECT_LT(rel(op.gm_over_id, 2.0 / vov), 0.05);
}

TEST(DeviceModel, DerivativesMatchFiniteDifferences) {
  const double h = 1e-6;
  for (auto kind : kAllKinds) {
    for (double vgs : {0.25, 0.45, 0.8, 1.2}) {
      for (double l : {0.18, 0.5, 2.0}) {
        const auto op = kModel.evaluate(kind, ProcessCorner::TT, l, vgs, 0.9);
        const auto up = kModel.evaluate(kind, ProcessCorner::TT, l, vgs + h, 0.9);
        const auto dn = kModel.evaluate(kind, ProcessCorner::TT, l, vgs - h, 0.9);
        EXPECT_LT(rel(op.gm_per_w, (up.id_per_w - dn.id_per_w) / (2 * h)), 1e-5);
        const auto vu = kModel.evaluate(kind, ProcessCorner::TT, l, vgs, 0.9 + h);
        const auto vd = kModel.evaluate(kind, ProcessCorner::TT, l, vgs, 0.9 - h);
        EXPECT_LT(rel(op.gds_per_w, (vu.id_per_w - vd.id_per_w) / (2 * h)), 1e-5);
        EXPECT_DOUBLE_EQ(op.gm_over_id, op.gm_per_w / op.id_per_w);
      }
    }
  }
}

TEST(DeviceModel, RatioFallsWithOverdriveAndOutputConductanceWithLength) {
  double prev = 1e9;
  for (double vgs = 0.2; vgs <= 1.2; vgs += 0.05) {
    const auto op = kModel.evaluate(DeviceKind::nmos, ProcessCorner::TT, 0.5, vgs, 0.9);
    EXPECT_LT(op.gm_over_id, prev);
    prev = op.gm_over_id;
  }
  const auto s = kModel.evaluate(DeviceKind::pmos, ProcessCorner::TT, 0.18, 0.7, 0.9);
  const auto g = kModel.evaluate(DeviceKind::pmos, ProcessCorner::TT, 2.0, 0.7, 0.9);
  EXPECT_GT(s.gds_per_w / s.id_per_w, g.gds_per_w / g.id_per_w);
}

TEST(DeviceModel, CornerShifts) {
  const auto n = ModelConfig::defaults().nmos;
  const auto pm = ModelConfig::defaults().pmos;
  auto check = [&](DeviceKind k, ProcessCorner c, double vth, double kp) {
    const auto p = kModel.corner_params(k, c);
    EXPECT_NEAR(p.vth0, vth, 1e-12) << to_string(k) << " " << to_string(c);
    EXPECT_NEAR(p.kp, kp, 1e-15) << to_string(k) << " " << to_string(c);
  };
  check(DeviceKind::nmos, ProcessCorner::TT, n.vth0, n.kp);
  check(DeviceKind::nmos, ProcessCorner::FF, n.vth0 - 0.03, n.kp * 1.1);
  check(DeviceKind::nmos, ProcessCorner::SS, n.vth0 + 0.03, n.kp * 0.9);
  check(DeviceKind::nmos, ProcessCorner::FS, n.vth0 - 0.03, n.kp * 1.1);
  check(DeviceKind::pmos, ProcessCorner::FS, pm.vth0 + 0.03, pm.kp * 0.9);
  check(DeviceKind::nmos, ProcessCorner::SF, n.vth0 + 0.03, n.kp * 0.9);
  check(DeviceKind::pmos, ProcessCorner::SF, pm.vth0 - 0.03, pm.kp * 1.1);

  const auto tt = kModel.evaluate(DeviceKind::nmos, ProcessCorner::TT, 0.5, 0.6, 0.9);
  const auto ff = kModel.evaluate(DeviceKind::nmos, ProcessCorner::FF, 0.5, 0.6, 0.9);
  const auto ss = kModel.evaluate(DeviceKind::nmos, ProcessCorner::SS, 0.5, 0.6, 0.9);
  EXPECT_GT(ff.id_per_w, tt.id_per_w);
  EXPECT_LT(ss.id_per_w, tt.id_per_w);
}

TEST(DeviceModel, DomainErrors) {
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::config;
  };
  EXPECT_EQ(code([] { kModel.evaluate(DeviceKind::nmos, ProcessCorner::TT, 0.1, 0.5, 0.9); }),
            ErrorCode::domain);
  EXPECT_EQ(code([] { kModel.evaluate(DeviceKind::nmos, ProcessCorner::TT, 6.0, 0.5, 0.9); }),
            ErrorCode::domain);
  EXPECT_EQ(code([] { kModel.evaluate(DeviceKind::nmos, ProcessCorner::TT, 0.5, -0.1, 0.9); }),
            ErrorCode::domain);
  EXPECT_EQ(code([] { kModel.evaluate(DeviceKind::nmos, ProcessCorner::TT, 0.5, 0.5, 0.0); }),
            ErrorCode::domain);
  EXPECT_EQ(code([] { kModel.evaluate(DeviceKind::nmos, ProcessCorner::TT, 0.5, 0.5, 1.9); }),
            ErrorCode::domain);
}

TEST(DeviceModel, ConfigFile) {
  testing_support::TempDir dir("model");
  kv::write_text(dir / "m.cfg", "# overrides\nnmos.vth0=0.41\ncorner.vth_shift=0.05\n");
  const DeviceModel m(ModelConfig::load(dir / "m.cfg"));
  EXPECT_NEAR(m.vth(DeviceKind::nmos, ProcessCorner::TT), 0.41, 1e-12);
  EXPECT_NEAR(m.vth(DeviceKind::nmos, ProcessCorner::SS), 0.46, 1e-12);

  kv::write_text(dir / "bad.cfg", "nmos.bogus=1\n");
  try {
    ModelConfig::load(dir / "bad.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
  }
  kv::write_text(dir / "neg.cfg", "pmos.kp=-1\n");
  EXPECT_THROW(ModelConfig::load(dir / "neg.cfg"), Error);
}
