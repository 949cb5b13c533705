#include "doctest.h"
#include "splitting.hpp"

using namespace an3;

static double sdist(const Vec3& a, const Vec3& b) { return std::min((a - b).norm(), (a + b).norm()); }

TEST_CASE("linear frames equal the eigenvectors") {
  AnosovMap m = default_map(0.0);
  SplitMix rng(11);
  for (int i = 0; i < 8; ++i) {
    Vec3 x(rng.uniform(), rng.uniform(), rng.uniform());
    SplittingFrame f = splitting_frame(m, x);
    CHECK(sdist(f.e_s, m.lin.e[0]) < 1e-10);
    CHECK(sdist(f.e_c, m.lin.e[1]) < 1e-10);
    CHECK(sdist(f.e_u, m.lin.e[2]) < 1e-10);
    CHECK(f.rate_u == doctest::Approx(m.lin.lam[2]).epsilon(1e-12));
  }
}

TEST_CASE("perturbed frames are invariant") {
  AnosovMap m = default_map(0.05);
  Vec3 x(0.3, 0.7, 0.1);
  SplittingFrame f = splitting_frame(m, x);
  SplittingFrame g = splitting_frame(m, eval(m, x));
  Mat3 J = jacobian(m, x);
  CHECK(sdist((J * f.e_u).normalized(), g.e_u) < 1e-8);
  CHECK(sdist((J * f.e_c).normalized(), g.e_c) < 1e-8);
  CHECK(sdist((J * f.e_s).normalized(), g.e_s) < 1e-8);
  CHECK(std::abs(f.n_cs.dot(f.e_c)) < 1e-10);
  CHECK(std::abs(f.n_cs.dot(f.e_s)) < 1e-10);
}

TEST_CASE("dominated splitting bounds") {
  RateBounds r = rate_bounds(default_map(0.05), 8);
  CHECK(r.dominated_uniformly);
  CHECK(r.max_s < 1);
  CHECK(r.min_c > 1);
  CHECK(r.max_c < r.min_u);
}

TEST_CASE("center jacobian is ln lambda_c in the linear case") {
  AnosovMap m = default_map(0.0);
  CHECK(center_jacobian(m, Vec3(0.1, 0.2, 0.3)) == doctest::Approx(-std::log(m.lin.lam[1])).epsilon(1e-12));
}
