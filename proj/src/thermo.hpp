#pragma once

#include "periodic.hpp"

#include <complex>
#include <string>
#include <vector>

namespace an3 {

using cplx = std::complex<double>;

// Artin-Mazur zeta of the linear model, exp(sum_m Card F_m z^m / m).
// zeros at 1/lambda_i, poles at 1/(lambda_i lambda_j).
struct ZetaRational {
  std::array<double, 3> numerator_roots{};
  std::array<double, 3> denominator_roots{};
  std::array<long long, 4> numerator_poly{};    // integer coefficients in z, ascending
  std::array<long long, 4> denominator_poly{};
  cplx eval(cplx z) const;
  // exact integer Taylor coefficients of zeta, orders 0..N
  std::vector<long long> taylor(int N) const;
};

ZetaRational zeta_exact(const AnosovMap& m);

std::vector<long long> zeta_series(const AnosovMap& m, int N, const PeriodicOptions& opt = {});
// zeta Taylor coefficients generated from counts (integer recursion)
std::vector<long long> zeta_taylor_from_counts(const std::vector<long long>& counts);

struct DynDet {
  cplx value;
  double last_term_ratio = 0;  // |N-th term| / max(1, |log D|)
  bool truncation_warning = false;
};

// sets[m-1] must hold period m for m = 1..N
DynDet dyn_determinant(const std::vector<PeriodicSet>& sets, int k, int N, cplx z, double warn_ratio = 1e-3);

struct TrigObs {
  std::array<int, 3> k{0, 0, 0};
  double amp = 1.0;
  double phase = 0.0;
};

// g(x) = c0 + sum amp cos(2 pi k.x + phase)
struct Observable {
  std::string id;
  double c0 = 0.0;
  std::vector<TrigObs> terms;
  double operator()(const Vec3& x) const;
};

Observable observable_one();
Observable observable_cos(const std::string& id, std::array<int, 3> k, double phase = 0.0);

struct BowenEstimate {
  std::string observable_id;
  int period = 0;
  double value = 0;       // self-normalized
  double prev_value = 0;  // same at period-1 (NaN if unavailable)
  double raw = 0;         // lambda_u^{-n} sum exp(jc_sum) g
  double raw_one = 0;     // same for g = 1
};

BowenEstimate bowen_measure(const AnosovMap& m, const PeriodicSet& set, const Observable& g,
                            const PeriodicSet* prev = nullptr);

// weights exp(jc_sum) / sum, in point order
std::vector<double> bowen_weights(const PeriodicSet& set);

struct PressureSeries {
  std::vector<int> n;
  std::vector<double> p;      // (1/n) ln sum exp(jc_sum)
  std::vector<double> q;      // n p_n - (n-1) p_{n-1}
  double limit = 0;
  double error = 0;
};

PressureSeries pressure_estimate(const std::vector<PeriodicSet>& sets);

enum class Verdict { JointlyIntegrable, NotJointlyIntegrable, Inconclusive };
const char* verdict_name(Verdict v);

struct IntegrabilityResult {
  Verdict verdict = Verdict::Inconclusive;
  double spread = 0;
  double tol = 0;
};

IntegrabilityResult integrability_test(const AnosovMap& m, const std::vector<PeriodicSet>& sets, double tol);

// max over orbits of | |det(I - df^{-m})| * |mu_s| - 1 |
double trace_asymptotic_residual(const PeriodicSet& set);

}  // namespace an3
