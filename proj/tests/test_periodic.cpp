#include "doctest.h"
#include "periodic.hpp"

#include <set>

using namespace an3;

TEST_CASE("lefschetz counts of the companion matrix") {
  IMat3 A = companion_matrix();
  CHECK(lefschetz_count(A, 1) == 1);
  CHECK(lefschetz_count(A, 2) == 13);
  CHECK(lefschetz_count(A, 3) == 91);
  AnosovMap m = default_map(0.0);
  for (int n = 1; n <= 10; ++n) {
    double d = 1;
    for (int i = 0; i < 3; ++i) d *= std::abs(std::pow(m.lin.lam[i], n) - 1.0);
    CHECK(double(lefschetz_count(A, n)) == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("smith normal form divisibility") {
  IMat3 A = companion_matrix();
  IMat3 M = imat_pow(A, 4);
  for (int i = 0; i < 3; ++i) M[i][i] -= 1;
  Smith s = smith_normal_form(M);
  __int128 prod = s.d[0] * s.d[1] * s.d[2];
  if (prod < 0) prod = -prod;
  CHECK((long long)prod == lefschetz_count(A, 4));
  CHECK(s.d[1] % s.d[0] == 0);
  CHECK(s.d[2] % s.d[1] == 0);
}

TEST_CASE("linear periodic points are exact and distinct") {
  AnosovMap m = default_map(0.0);
  for (int n = 1; n <= 5; ++n) {
    PeriodicSet s = linear_periodic_points(m, n);
    CHECK((long long)s.points.size() == lefschetz_count(m.A, n));
    CHECK(s.max_residual < 1e-10);
    long long orbit_pts = 0;
    for (const auto& o : s.orbits) {
      CHECK(n % o.length == 0);
      orbit_pts += o.length;
    }
    CHECK(orbit_pts == (long long)s.points.size());
  }
}

TEST_CASE("continuation keeps the count for the perturbed map") {
  AnosovMap m = default_map(0.05);
  for (int n = 1; n <= 5; ++n) {
    PeriodicSet s = continue_periodic_points(m, n);
    CHECK((long long)s.points.size() == lefschetz_count(m.A, n));
    CHECK(s.max_residual < 1e-9);
    for (const auto& p : s.points) {
      Vec3 y = p.point;
      for (int k = 0; k < n; ++k) y = eval(m, y);
      CHECK(torus_dist(y, p.point) < 1e-9);
    }
  }
}

TEST_CASE("continuation is deterministic across worker counts") {
  AnosovMap m = default_map(0.05);
  PeriodicOptions a, b;
  a.workers = 1;
  b.workers = 3;
  PeriodicSet s = continue_periodic_points(m, 4, a), t = continue_periodic_points(m, 4, b);
  REQUIRE(s.points.size() == t.points.size());
  for (size_t i = 0; i < s.points.size(); ++i) CHECK(s.points[i].point == t.points[i].point);
}

TEST_CASE("budget is enforced") {
  PeriodicOptions o;
  o.budget = 50;
  CHECK_THROWS_AS(continue_periodic_points(default_map(0.05), 3, o), Error);
}
