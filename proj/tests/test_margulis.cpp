#include "doctest.h"
#include "margulis.hpp"

using namespace an3;

TEST_CASE("linear margulis residuals vanish") {
  AnosovMap m = default_map(0.0);
  Vec3 x(0.3, 0.7, 0.1);
  MargulisOptions o;
  o.max_seg = 0.05;
  o.bins = 8;
  LeafDensity d = u_density_iterate(m, x, 0.1, 8, o);
  CHECK(u_scaling_residual(d) < 1e-8);
  CsPatch p = make_cs_patch(m, x, 0.05, 8);
  CHECK(theta_scaling_residual(m, p, 8) < 1e-8);
  Rectangle R = make_rectangle(m, x, 0.05, 0.05);
  CHECK(cs_invariance_residual(m, R, 8, o).value < 1e-8);
  CHECK(u_invariance_residual(m, R, 8, o).value < 1e-8);
  Vec3 y = mod1(x + center_leaf_offset(m, x, 0.05));
  CHECK(std::abs(omega_center_density(m, x, y).value) < 1e-8);
}

TEST_CASE("leaf density masses sum to window length in the linear case") {
  AnosovMap m = default_map(0.0);
  MargulisOptions o;
  o.max_seg = 0.05;
  o.bins = 4;
  LeafDensity d = u_density_iterate(m, Vec3(0.3, 0.7, 0.1), 0.1, 6, o);
  double s = 0;
  for (double v : d.mass) s += v;
  CHECK(s == doctest::Approx(0.1).epsilon(1e-9));
  for (double v : d.density) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("perturbed u scaling converges") {
  AnosovMap m = default_map(0.05);
  MargulisOptions o;
  o.max_seg = 0.05;
  o.bins = 8;
  double a = u_scaling_residual(u_density_iterate(m, Vec3(0.3, 0.7, 0.1), 0.1, 6, o));
  double b = u_scaling_residual(u_density_iterate(m, Vec3(0.3, 0.7, 0.1), 0.1, 9, o));
  CHECK(b < a);
  CHECK(b < 1e-2);
}

TEST_CASE("perturbed holonomy residuals decrease with n") {
  AnosovMap m = default_map(0.05);
  MargulisOptions o;
  o.max_seg = 0.05;
  o.bins = 8;
  Rectangle R = make_rectangle(m, Vec3(0.3, 0.7, 0.1), 0.05, 0.05);
  double c8 = cs_invariance_residual(m, R, 8, o).value, c10 = cs_invariance_residual(m, R, 10, o).value;
  double u8 = u_invariance_residual(m, R, 8, o).value, u10 = u_invariance_residual(m, R, 10, o).value;
  CHECK(c10 < c8);
  CHECK(u10 < u8);
}

TEST_CASE("center density is nontrivial when perturbed") {
  AnosovMap m = default_map(0.05);
  Vec3 x(0.3, 0.7, 0.1);
  Vec3 y = mod1(x + center_leaf_offset(m, x, 0.05));
  OmegaResult r = omega_center_density(m, x, y);
  CHECK(std::isfinite(r.value));
  CHECK(r.tail_bound < 1e-5);
}
