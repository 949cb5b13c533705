#include "thermo.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace an3 {

namespace {

long long trace(const IMat3& a) { return a[0][0] + a[1][1] + a[2][2]; }

long long minors2(const IMat3& a) {
  return a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0] +
         a[1][1] * a[2][2] - a[1][2] * a[2][1];
}

}  // namespace

cplx ZetaRational::eval(cplx z) const {
  cplx num = 1, den = 1;
  for (int i = 0; i < 3; ++i) {
    num *= 1.0 - z / numerator_roots[i];
    den *= 1.0 - z / denominator_roots[i];
  }
  return num / den;
}

std::vector<long long> ZetaRational::taylor(int N) const {
  std::vector<__int128> a(N + 1, 0);
  for (int k = 0; k <= N; ++k) {
    __int128 s = k <= 3 ? numerator_poly[k] : 0;
    for (int j = 1; j <= std::min(k, 3); ++j) s -= (__int128)denominator_poly[j] * a[k - j];
    a[k] = s;
  }
  std::vector<long long> r(N + 1);
  for (int k = 0; k <= N; ++k) {
    if (a[k] > (__int128)std::numeric_limits<long long>::max() || a[k] < (__int128)std::numeric_limits<long long>::min())
      throw Error(Code::Overflow, "zeta Taylor coefficient overflows");
    r[k] = (long long)a[k];
  }
  return r;
}

ZetaRational zeta_exact(const AnosovMap& m) {
  ZetaRational z;
  const auto& lam = m.lin.lam;
  for (int i = 0; i < 3; ++i) {
    z.numerator_roots[i] = 1.0 / lam[i];
    z.denominator_roots[i] = lam[i];  // 1/(lambda_j lambda_k) = lambda_i since det = 1
  }
  z.numerator_poly = {1, -trace(m.A), minors2(m.A), -imat_det(m.A)};
  z.denominator_poly = {1, -trace(m.Ainv), minors2(m.Ainv), -imat_det(m.Ainv)};
  return z;
}

std::vector<long long> zeta_series(const AnosovMap& m, int N, const PeriodicOptions& opt) {
  if (N < 1) throw Error(Code::InvalidArgument, "zeta_series: N must be >= 1");
  std::vector<long long> c;
  for (int n = 1; n <= N; ++n) {
    PeriodicSet s = continue_periodic_points(m, n, opt);
    c.push_back((long long)s.points.size());
  }
  return c;
}

std::vector<long long> zeta_taylor_from_counts(const std::vector<long long>& counts) {
  int N = (int)counts.size();
  std::vector<__int128> a(N + 1, 0);
  a[0] = 1;
  for (int k = 1; k <= N; ++k) {
    __int128 s = 0;
    for (int j = 1; j <= k; ++j) s += (__int128)counts[j - 1] * a[k - j];
    if (s % k != 0) throw Error(Code::Internal, "zeta Taylor coefficient from counts is not an integer");
    a[k] = s / k;
  }
  std::vector<long long> r(N + 1);
  for (int k = 0; k <= N; ++k) r[k] = (long long)a[k];
  return r;
}

DynDet dyn_determinant(const std::vector<PeriodicSet>& sets, int k, int N, cplx z, double warn_ratio) {
  if (k < 0 || k > 3) throw Error(Code::InvalidArgument, "dyn_determinant: k must be in 0..3");
  if (N < 1 || (int)sets.size() < N) throw Error(Code::InvalidArgument, "dyn_determinant: need periodic sets 1..N");
  cplx logd = 0;
  cplx last = 0;
  cplx zm = 1;
  for (int m = 1; m <= N; ++m) {
    const PeriodicSet& s = sets[m - 1];
    if (s.period != m) throw Error(Code::InvalidArgument, "dyn_determinant: periodic sets out of order");
    zm *= z;
    long double acc = 0;
    for (const auto& o : s.orbits) {
      double inv[3] = {1.0 / o.mult[0], 1.0 / o.mult[1], 1.0 / o.mult[2]};
      double tr;
      switch (k) {
        case 0: tr = 1.0; break;
        case 1: tr = inv[0] + inv[1] + inv[2]; break;
        case 2: tr = inv[0] * inv[1] + inv[0] * inv[2] + inv[1] * inv[2]; break;
        default: tr = inv[0] * inv[1] * inv[2]; break;
      }
      double det = (1.0 - inv[0]) * (1.0 - inv[1]) * (1.0 - inv[2]);
      acc += (long double)o.length * tr / std::abs(det);
    }
    cplx term = zm / double(m) * double(acc);
    logd -= term;
    last = term;
  }
  DynDet d;
  d.value = std::exp(logd);
  d.last_term_ratio = std::abs(last) / std::max(1.0, std::abs(logd));
  d.truncation_warning = d.last_term_ratio > warn_ratio;
  return d;
}

double Observable::operator()(const Vec3& x) const {
  double v = c0;
  for (const auto& t : terms) {
    double kx = t.k[0] * x[0] + t.k[1] * x[1] + t.k[2] * x[2];
    v += t.amp * std::cos(kTwoPi * frac(kx) + t.phase);
  }
  return v;
}

Observable observable_one() {
  Observable g;
  g.id = "one";
  g.c0 = 1.0;
  return g;
}

Observable observable_cos(const std::string& id, std::array<int, 3> k, double phase) {
  Observable g;
  g.id = id;
  TrigObs t;
  t.k = k;
  t.phase = phase;
  g.terms.push_back(t);
  return g;
}

std::vector<double> bowen_weights(const PeriodicSet& set) {
  long double tot = 0;
  for (const auto& p : set.points) tot += std::exp((long double)p.jc_sum);
  std::vector<double> w(set.points.size());
  for (size_t i = 0; i < w.size(); ++i) w[i] = double(std::exp((long double)set.points[i].jc_sum) / tot);
  return w;
}

namespace {

void bowen_sums(const PeriodicSet& set, const Observable& g, long double& sg, long double& s1) {
  sg = 0;
  s1 = 0;
  for (const auto& p : set.points) {
    long double w = std::exp((long double)p.jc_sum);
    s1 += w;
    sg += w * g(p.point);
  }
}

}  // namespace

BowenEstimate bowen_measure(const AnosovMap& m, const PeriodicSet& set, const Observable& g, const PeriodicSet* prev) {
  if (set.points.empty()) throw Error(Code::InvalidArgument, "bowen_measure: empty periodic set");
  BowenEstimate b;
  b.observable_id = g.id;
  b.period = set.period;
  long double sg, s1;
  bowen_sums(set, g, sg, s1);
  long double scale = std::pow((long double)m.lin.lam[2], -(long double)set.period);
  b.raw = double(scale * sg);
  b.raw_one = double(scale * s1);
  b.value = double(sg / s1);
  b.prev_value = std::numeric_limits<double>::quiet_NaN();
  if (prev && !prev->points.empty()) {
    long double pg, p1;
    bowen_sums(*prev, g, pg, p1);
    b.prev_value = double(pg / p1);
  }
  return b;
}

PressureSeries pressure_estimate(const std::vector<PeriodicSet>& sets) {
  if (sets.empty()) throw Error(Code::InvalidArgument, "pressure_estimate: no periodic data");
  PressureSeries ps;
  double prev_np = 0;
  for (size_t i = 0; i < sets.size(); ++i) {
    const PeriodicSet& s = sets[i];
    long double acc = 0;
    for (const auto& o : s.orbits) acc += (long double)o.length * std::exp((long double)s.points[o.first].jc_sum);
    double np = double(std::log(acc));
    ps.n.push_back(s.period);
    ps.p.push_back(np / s.period);
    ps.q.push_back(i == 0 ? np : np - prev_np);
    prev_np = np;
  }
  // Aitken delta^2 on the increments q_n, applied twice when there are enough
  // terms (the error is a sum of several geometric modes)
  auto aitken = [](const std::vector<double>& s) {
    std::vector<double> out;
    for (size_t j = 2; j < s.size(); ++j) {
      double d1 = s[j - 1] - s[j - 2], d2 = s[j] - s[j - 1];
      double den = d2 - d1;
      out.push_back((std::abs(den) < 1e-300 || std::abs(d2) < 1e-15) ? s[j] : s[j] - d2 * d2 / den);
    }
    return out;
  };
  const auto& q = ps.q;
  size_t L = q.size();
  if (L >= 5) {
    auto a1 = aitken(q);
    auto a2 = aitken(a1);
    ps.limit = a2.back();
    ps.error = std::abs(a2.back() - a1.back());
  } else if (L >= 3) {
    auto a1 = aitken(q);
    ps.limit = a1.back();
    ps.error = std::abs(a1.back() - q.back());
  } else if (L == 2) {
    ps.limit = q[1];
    ps.error = std::abs(q[1] - q[0]);
  } else {
    ps.limit = q[0];
    ps.error = std::numeric_limits<double>::infinity();
  }
  return ps;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::JointlyIntegrable: return "JointlyIntegrable";
    case Verdict::NotJointlyIntegrable: return "NotJointlyIntegrable";
    default: return "Inconclusive";
  }
}

IntegrabilityResult integrability_test(const AnosovMap& m, const std::vector<PeriodicSet>& sets, double tol) {
  IntegrabilityResult r;
  r.tol = tol;
  const double lnc = std::log(m.lin.lam[1]);
  double spread = 0;
  for (const auto& s : sets)
    for (const auto& o : s.orbits) {
      double jc = s.points[o.first].jc_sum;
      spread = std::max(spread, std::abs(jc + s.period * lnc) / s.period);
    }
  r.spread = spread;
  if (spread > tol)
    r.verdict = Verdict::NotJointlyIntegrable;
  else if (spread < tol / 10)
    r.verdict = Verdict::JointlyIntegrable;
  else
    r.verdict = Verdict::Inconclusive;
  return r;
}

double trace_asymptotic_residual(const PeriodicSet& set) {
  double worst = 0;
  for (const auto& o : set.orbits) {
    double det = (1 - 1 / o.mult[0]) * (1 - 1 / o.mult[1]) * (1 - 1 / o.mult[2]);
    worst = std::max(worst, std::abs(std::abs(det) * std::abs(o.mult[0]) - 1.0));
  }
  return worst;
}

}  // namespace an3
