#include "doctest.h"
#include "thermo.hpp"

using namespace an3;

namespace {
std::vector<PeriodicSet> sets_upto(const AnosovMap& m, int N) {
  std::vector<PeriodicSet> s;
  for (int n = 1; n <= N; ++n) s.push_back(continue_periodic_points(m, n));
  return s;
}
}  // namespace

TEST_CASE("rational zeta of the linear model") {
  AnosovMap m = default_map(0.0);
  ZetaRational z = zeta_exact(m);
  auto counts = zeta_series(m, 8);
  CHECK(counts[2] == 91);
  auto ser = zeta_taylor_from_counts(counts);
  auto ex = z.taylor(8);
  REQUIRE(ser.size() == ex.size());
  for (size_t i = 0; i < ex.size(); ++i) CHECK(ser[i] == ex[i]);
  CHECK(ex[0] == 1);
  CHECK(ex[1] == 1);
  // exp(z + 13 z^2/2 + ...) -> second coefficient (1 + 13)/2
  CHECK(ex[2] == 7);
  cplx w(0.05, 0.02);
  cplx logz = 0;
  for (int n = 1; n <= 60; ++n) {
    double card = 1;
    for (int i = 0; i < 3; ++i) card *= std::abs(std::pow(m.lin.lam[i], n) - 1.0);
    logz += card * std::pow(w, n) / double(n);
  }
  CHECK(std::abs(z.eval(w) - std::exp(logz)) < 1e-10);
}

TEST_CASE("zeta taylor from counts") {
  auto t = zeta_taylor_from_counts({1, 13, 91});
  REQUIRE(t.size() == 4);
  CHECK(t[0] == 1);
  CHECK(t[1] == 1);
  CHECK(t[2] == 7);
  CHECK(t[3] == (1 + 3 * 13 + 2 * 91) / 6);
}

TEST_CASE("determinant identity holds, literal form does not") {
  AnosovMap m = default_map(0.0);
  auto sets = sets_upto(m, 8);
  ZetaRational zr = zeta_exact(m);
  cplx z = std::polar(0.08, 0.9);
  DynDet d[4];
  for (int k = 0; k < 4; ++k) d[k] = dyn_determinant(sets, k, 8, z);
  cplx zeta = zr.eval(z);
  double good = std::abs(zeta * d[1].value * d[3].value / (d[0].value * d[2].value) - 1.0);
  double literal = std::abs(zeta * d[0].value * d[2].value / (d[1].value * d[3].value) - 1.0);
  CHECK(good < 1e-4);
  CHECK(literal > 1e-2);
}

TEST_CASE("bowen measure: self normalization and linear equidistribution") {
  AnosovMap m = default_map(0.0);
  auto sets = sets_upto(m, 8);
  BowenEstimate one = bowen_measure(m, sets.back(), observable_one(), &sets[6]);
  CHECK(one.value == doctest::Approx(1.0).epsilon(1e-14));
  BowenEstimate c = bowen_measure(m, sets.back(), observable_cos("c1", {1, 0, 0}), &sets[6]);
  CHECK(std::abs(c.value) < 1e-3);
  auto w = bowen_weights(sets.back());
  double s = 0;
  for (double v : w) s += v;
  CHECK(std::abs(s - 1.0) < 1e-9);
}

TEST_CASE("pressure of the linear model") {
  AnosovMap m = default_map(0.0);
  auto sets = sets_upto(m, 8);
  PressureSeries p = pressure_estimate(sets);
  CHECK(std::abs(std::exp(p.limit) - m.lin.lam[2]) < 5e-3);
  CHECK(p.error > std::abs(p.limit - std::log(m.lin.lam[2])) / 4);
  // q_n is monotone towards ln lambda_u
  for (size_t i = 2; i < p.q.size(); ++i)
    CHECK(std::abs(p.q[i] - std::log(m.lin.lam[2])) <= std::abs(p.q[i - 1] - std::log(m.lin.lam[2])) + 1e-15);
}

TEST_CASE("integrability dichotomy") {
  auto lin = sets_upto(default_map(0.0), 5);
  IntegrabilityResult a = integrability_test(default_map(0.0), lin, 1e-4);
  CHECK(a.verdict == Verdict::JointlyIntegrable);
  CHECK(a.spread == 0.0);
  AnosovMap m = default_map(0.05);
  auto per = sets_upto(m, 5);
  IntegrabilityResult b = integrability_test(m, per, 1e-4);
  CHECK(b.verdict == Verdict::NotJointlyIntegrable);
  CHECK(b.spread > 1e-2);
  CHECK(std::string(verdict_name(b.verdict)) == "NotJointlyIntegrable");
}

TEST_CASE("trace asymptotics for the linear model") {
  // residual decays like lambda_c^{-n}
  AnosovMap m = default_map(0.0);
  auto sets = sets_upto(m, 6);
  double r3 = trace_asymptotic_residual(sets[2]), r6 = trace_asymptotic_residual(sets[5]);
  CHECK(r6 < r3);
  CHECK(r6 < 2 * std::pow(m.lin.lam[1], -6));
}
