#include "doctest.h"
#include "unstable_geometry.hpp"

using namespace an3;

TEST_CASE("linear unstable curve grows exactly") {
  AnosovMap m = default_map(0.0);
  CurveOptions o;
  o.max_seg = 0.05;
  UnstableCurve c = grow_curve(m, Vec3(0.3, 0.7, 0.1), 0.1, 5, o);
  CHECK(c.length() == doctest::Approx(0.2 * std::pow(m.lin.lam[2], 5)).epsilon(1e-10));
  UnstableCurve c0 = grow_curve(m, Vec3(0.3, 0.7, 0.1), 0.1, 0, o);
  CHECK(c0.length() == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("linear entropy estimate") {
  AnosovMap m = default_map(0.0);
  CurveOptions o;
  o.max_seg = 0.05;
  EntropyEstimate e = entropy_estimate(m, Vec3(0.3, 0.7, 0.1), 0.05, 8, o);
  CHECK(std::abs(e.value - std::log(m.lin.lam[2])) < 1e-6);
}

TEST_CASE("perturbed entropy growth ratio") {
  AnosovMap m = default_map(0.05);
  CurveOptions o;
  o.max_seg = 0.05;
  EntropyEstimate e = entropy_estimate(m, Vec3(0.3, 0.7, 0.1), 0.05, 9, o);
  double r = e.lengths[9] / e.lengths[8];
  CHECK(std::abs(r / m.lin.lam[2] - 1) < 0.02);
  CHECK(std::abs(e.value - std::log(m.lin.lam[2])) < 0.02);
}

TEST_CASE("u-chart points lie on the unstable leaf") {
  AnosovMap m = default_map(0.05);
  UChart c = make_uchart(m, Vec3(0.3, 0.7, 0.1));
  Vec3 p, dp;
  uchart_point_tangent(m, c, 0.01, p, dp);
  SplittingFrame f = splitting_frame(m, mod1(p));
  CHECK(std::abs(std::abs(dp.normalized().dot(f.e_u)) - 1) < 1e-8);
}

TEST_CASE("cs leaf point stays close under forward iteration") {
  AnosovMap m = default_map(0.05);
  Vec3 x(0.3, 0.7, 0.1);
  Vec3 y = cs_leaf_point(m, x, 0.02, -0.01);
  // the u-component of F^n(y) - F^n(x) must not grow like lambda_u^n
  Vec3 a = x, b = nearest_lift(x, y);
  Vec3 d = b - a;
  for (int k = 0; k < 8; ++k) {
    d = eval_delta(m, a, d);
    a = eval(m, a);
  }
  CHECK(std::abs(m.lin.dual[2].dot(d)) < 1e-6 * std::pow(m.lin.lam[2], 8));
}

TEST_CASE("bracket lies on both leaves") {
  AnosovMap m = default_map(0.05);
  Vec3 x(0.3, 0.7, 0.1), y(0.32, 0.69, 0.11);
  Vec3 z = bracket(m, x, y);
  CsShooter sx = make_cs_shooter(m, x);
  CHECK(std::abs(cs_residual(m, sx, torus_delta(x, z))) < 1e-9);
  // z on W^u(y): a bracket of (z, y) with z itself returns z
  CHECK(torus_dist(bracket(m, z, y), z) < 1e-9);
}

TEST_CASE("bracket of a point with itself") {
  AnosovMap m = default_map(0.05);
  Vec3 x(0.6, 0.1, 0.4);
  CHECK(torus_dist(bracket(m, x, x), x) < 1e-10);
}

TEST_CASE("rectangle closes") {
  AnosovMap m = default_map(0.05);
  Rectangle R = make_rectangle(m, Vec3(0.3, 0.7, 0.1), 0.05, 0.05);
  CHECK(R.closure_defect < 1e-8);
}

TEST_CASE("linear quasi isometry constant near one") {
  AnosovMap m = default_map(0.0);
  CurveOptions o;
  o.max_seg = 0.05;
  UnstableCurve c = grow_curve(m, Vec3(0.3, 0.7, 0.1), 0.1, 3, o);
  CHECK(quasi_isometry_constant(c) < 1.01);
}
