#include "doctest.h"
#include "torus_maps.hpp"

using namespace an3;

TEST_CASE("companion matrix eigenvalues") {
  AnosovMap m = default_map(0.0);
  const double lu = 4 * std::pow(std::cos(M_PI / 7), 2);
  CHECK(m.lin.lam[2] == doctest::Approx(lu).epsilon(1e-14));
  CHECK(m.lin.lam[0] * m.lin.lam[1] * m.lin.lam[2] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.lin.lam[0] < 1.0);
  CHECK(m.lin.lam[1] > 1.0);
  CHECK(m.lin.lam[1] < m.lin.lam[2]);
  for (int i = 0; i < 3; ++i) {
    Vec3 r = m.Ad * m.lin.e[i] - m.lin.lam[i] * m.lin.e[i];
    CHECK(r.norm() < 1e-13);
    for (int j = 0; j < 3; ++j) CHECK(m.lin.dual[i].dot(m.lin.e[j]) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
  }
}

TEST_CASE("linear map is A x mod 1") {
  AnosovMap m = default_map(0.0);
  Vec3 x(0.3, 0.7, 0.1);
  Vec3 y = eval(m, x);
  Vec3 z = mod1(m.Ad * x);
  CHECK(torus_dist(y, z) < 1e-15);
}

TEST_CASE("perturbed map: jacobian against finite differences") {
  AnosovMap m = default_map(0.05);
  Vec3 x(0.21, 0.43, 0.87);
  Mat3 J = jacobian(m, x);
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    Vec3 d = Vec3::Zero();
    d[j] = h;
    Vec3 col = (eval_lift(m, x + d) - eval_lift(m, x - d)) / (2 * h);
    CHECK((col - J.col(j)).norm() < 1e-8);
  }
}

TEST_CASE("inverse undoes the map") {
  AnosovMap m = default_map(0.05);
  SplitMix rng(3);
  for (int i = 0; i < 20; ++i) {
    Vec3 x(rng.uniform(), rng.uniform(), rng.uniform());
    CHECK(torus_dist(inverse(m, eval(m, x)), x) < 1e-12);
  }
}

TEST_CASE("eval_delta avoids cancellation") {
  AnosovMap m = default_map(0.05);
  Vec3 y(0.4, 0.2, 0.9), d(1e-9, -2e-9, 3e-9);
  Vec3 a = eval_delta(m, y, d);
  Vec3 b = jacobian(m, y) * d;
  CHECK((a - b).norm() < 1e-16);
}

TEST_CASE("make_map rejects bad input") {
  IMat3 A = companion_matrix();
  CHECK_THROWS_AS(make_map(A, {}, -0.1), Error);
  IMat3 B{{{2, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  CHECK_THROWS_AS(make_map(B, {}, 0.0), Error);
  TrigTerm t;
  t.k = {0, 0, 0};
  t.amp = Vec3(0, 1, 0);
  CHECK_THROWS_AS(make_map(A, {t}, 0.05), Error);
}

TEST_CASE("validation passes for the default perturbation") {
  ValidationReport v = validate(default_map(0.05), 16);
  CHECK(v.min_det > 0);
  CHECK(v.u_cone_ratio < 1);
  CHECK(v.cs_cone_ratio < 1);
}

TEST_CASE("validation fails for a huge perturbation") {
  bool threw = false;
  try {
    validate(default_map(3.0), 16);
  } catch (const Error& e) {
    threw = e.code() == Code::NotDiffeomorphism || e.code() == Code::ConeViolation;
  }
  CHECK(threw);
}

TEST_CASE("integer matrix helpers") {
  IMat3 A = companion_matrix();
  CHECK(imat_det(A) == 1);
  IMat3 A3 = imat_pow(A, 3);
  IMat3 B = imat_mul(A, imat_mul(A, A));
  CHECK(A3 == B);
}
