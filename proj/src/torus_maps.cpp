#include "torus_maps.hpp"

#include <algorithm>
#include <sstream>

namespace an3 {

const char* code_name(Code c) {
  switch (c) {
    case Code::Ok: return "Ok";
    case Code::InvalidArgument: return "InvalidArgument";
    case Code::NoConvergence: return "NoConvergence";
    case Code::NotDiffeomorphism: return "NotDiffeomorphism";
    case Code::ConeViolation: return "ConeViolation";
    case Code::DegenerateFrame: return "DegenerateFrame";
    case Code::OrderViolation: return "OrderViolation";
    case Code::Overflow: return "Overflow";
    case Code::BudgetExceeded: return "BudgetExceeded";
    case Code::LostOrbit: return "LostOrbit";
    case Code::Collision: return "Collision";
    case Code::NoIntersection: return "NoIntersection";
    case Code::TangentDrift: return "TangentDrift";
    case Code::EigenNoConvergence: return "EigenNoConvergence";
    case Code::NormalizationDegenerate: return "NormalizationDegenerate";
    case Code::Underflow: return "Underflow";
    case Code::ConfigError: return "ConfigError";
    case Code::IoError: return "IoError";
    case Code::Internal: return "Internal";
  }
  return "Unknown";
}

IMat3 imat_mul(const IMat3& a, const IMat3& b) {
  IMat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      __int128 s = 0;
      for (int k = 0; k < 3; ++k) s += (__int128)a[i][k] * b[k][j];
      if (s > (__int128)INT64_MAX || s < (__int128)INT64_MIN)
        throw Error(Code::Overflow, "integer matrix product overflows 64 bits");
      r[i][j] = (long long)s;
    }
  return r;
}

IMat3 imat_pow(const IMat3& a, int n) {
  IMat3 r{};
  for (int i = 0; i < 3; ++i) r[i][i] = 1;
  for (int k = 0; k < n; ++k) r = imat_mul(r, a);
  return r;
}

long long imat_det(const IMat3& a) {
  __int128 d = (__int128)a[0][0] * ((__int128)a[1][1] * a[2][2] - (__int128)a[1][2] * a[2][1]) -
               (__int128)a[0][1] * ((__int128)a[1][0] * a[2][2] - (__int128)a[1][2] * a[2][0]) +
               (__int128)a[0][2] * ((__int128)a[1][0] * a[2][1] - (__int128)a[1][1] * a[2][0]);
  if (d > (__int128)INT64_MAX || d < (__int128)INT64_MIN)
    throw Error(Code::Overflow, "determinant overflows 64 bits");
  return (long long)d;
}

namespace {

LinearData linear_data(const Mat3& A) {
  Eigen::EigenSolver<Mat3> es(A);
  auto ev = es.eigenvalues();
  auto V = es.eigenvectors();
  for (int i = 0; i < 3; ++i)
    if (std::abs(ev[i].imag()) > 1e-12)
      throw Error(Code::InvalidArgument, "homology matrix has complex eigenvalues");
  std::array<int, 3> idx{0, 1, 2};
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return std::abs(ev[a].real()) < std::abs(ev[b].real()); });
  LinearData d;
  for (int i = 0; i < 3; ++i) {
    d.lam[i] = ev[idx[i]].real();
    Vec3 v = V.col(idx[i]).real();
    v.normalize();
    double s = v.sum();
    if (std::abs(s) < 1e-12) s = (v[0] != 0 ? v[0] : (v[1] != 0 ? v[1] : v[2]));
    if (s < 0) v = -v;
    d.e[i] = v;
    d.basis.col(i) = v;
  }
  if (!(d.lam[0] > 0 && d.lam[0] < 1 && d.lam[1] > 1 && d.lam[2] > d.lam[1]))
    throw Error(Code::InvalidArgument,
                "homology matrix must have real spectrum 0 < l_s < 1 < l_c < l_u");
  d.basis_inv = d.basis.inverse();
  for (int i = 0; i < 3; ++i) d.dual[i] = d.basis_inv.row(i).transpose();
  return d;
}

}  // namespace

AnosovMap make_map(const IMat3& A, std::vector<TrigTerm> terms, double eps, double L) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw Error(Code::InvalidArgument, "epsilon must be finite and >= 0");
  if (!(L > 0.0)) throw Error(Code::InvalidArgument, "conjugacy bound must be positive");
  if (imat_det(A) != 1) throw Error(Code::InvalidArgument, "homology matrix must have det = +1");
  for (const auto& t : terms) {
    if (t.k[0] == 0 && t.k[1] == 0 && t.k[2] == 0)
      throw Error(Code::InvalidArgument, "perturbation wavevector must be nonzero");
    if (!t.amp.allFinite() || !std::isfinite(t.phase))
      throw Error(Code::InvalidArgument, "perturbation amplitude must be finite");
  }
  AnosovMap m;
  m.A = A;
  m.terms = std::move(terms);
  m.eps = eps;
  m.L = L;
  m.Ad = to_real(A);
  // adjugate, det = 1
  const auto& a = A;
  m.Ainv = {{{a[1][1] * a[2][2] - a[1][2] * a[2][1], a[0][2] * a[2][1] - a[0][1] * a[2][2],
              a[0][1] * a[1][2] - a[0][2] * a[1][1]},
             {a[1][2] * a[2][0] - a[1][0] * a[2][2], a[0][0] * a[2][2] - a[0][2] * a[2][0],
              a[0][2] * a[1][0] - a[0][0] * a[1][2]},
             {a[1][0] * a[2][1] - a[1][1] * a[2][0], a[0][1] * a[2][0] - a[0][0] * a[2][1],
              a[0][0] * a[1][1] - a[0][1] * a[1][0]}}};
  m.Ainv_d = to_real(m.Ainv);
  m.lin = linear_data(m.Ad);
  return m;
}

AnosovMap with_epsilon(const AnosovMap& m, double eps) {
  AnosovMap r = m;
  if (!(eps >= 0.0)) throw Error(Code::InvalidArgument, "epsilon must be >= 0");
  r.eps = eps;
  return r;
}

IMat3 companion_matrix() { return {{{0, 0, 1}, {1, 0, -6}, {0, 1, 5}}}; }

AnosovMap default_map(double eps) {
  TrigTerm t;
  t.k = {0, 0, 1};
  t.amp = Vec3(0, 1, 0);
  t.phase = 0.0;
  return make_map(companion_matrix(), {t}, eps);
}

static inline double phase_of(const TrigTerm& t, const Vec3& x) {
  // reduce k.x mod 1 before scaling so large lifts keep their fractional precision
  double kx = t.k[0] * x[0] + t.k[1] * x[1] + t.k[2] * x[2];
  return kTwoPi * frac(kx) + t.phase;
}

Vec3 eval_lift(const AnosovMap& m, const Vec3& x) {
  Vec3 y = m.Ad * x;
  if (m.eps != 0.0)
    for (const auto& t : m.terms) y += (m.eps * std::sin(phase_of(t, x))) * t.amp;
  return y;
}

Vec3 eval(const AnosovMap& m, const Vec3& x) { return mod1(eval_lift(m, x)); }

Vec3 eval_delta(const AnosovMap& m, const Vec3& y, const Vec3& d, Mat3* jac) {
  Vec3 r = m.Ad * d;
  if (jac) *jac = m.Ad;
  if (m.eps == 0.0) return r;
  for (const auto& t : m.terms) {
    double ph = phase_of(t, y);
    double kd = t.k[0] * d[0] + t.k[1] * d[1] + t.k[2] * d[2];
    double h = 0.5 * kTwoPi * (kd - std::round(kd));
    // sin(ph + 2h) - sin(ph) = 2 cos(ph + h) sin(h)
    r += (m.eps * 2.0 * std::cos(ph + h) * std::sin(h)) * t.amp;
    if (jac) {
      double cc = m.eps * kTwoPi * std::cos(ph + 2.0 * h);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) (*jac)(i, j) += cc * t.amp[i] * t.k[j];
    }
  }
  return r;
}

Vec3 inverse_delta(const AnosovMap& m, const Vec3& xb, const Vec3& d, Mat3* jac) {
  Vec3 e = m.Ainv_d * d;
  Mat3 J = m.Ad;
  if (m.eps != 0.0) {
    for (int it = 0; it < 40; ++it) {
      Vec3 r = eval_delta(m, xb, e, &J) - d;
      Vec3 de = J.partialPivLu().solve(r);
      e -= de;
      if (de.lpNorm<Eigen::Infinity>() <= 1e-17 + 1e-15 * e.lpNorm<Eigen::Infinity>()) break;
      if (it == 39) throw Error(Code::NoConvergence, "inverse_delta: Newton failed");
    }
    eval_delta(m, xb, e, &J);
  }
  if (jac) *jac = J;
  return e;
}

Mat3 jacobian(const AnosovMap& m, const Vec3& x) {
  Mat3 J = m.Ad;
  if (m.eps != 0.0)
    for (const auto& t : m.terms) {
      double c = m.eps * kTwoPi * std::cos(phase_of(t, x));
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) J(i, j) += c * t.amp[i] * t.k[j];
    }
  return J;
}

void eval_with_jacobian(const AnosovMap& m, const Vec3& x, Vec3& fx, Mat3& df) {
  fx = m.Ad * x;
  df = m.Ad;
  if (m.eps == 0.0) return;
  for (const auto& t : m.terms) {
    double ph = phase_of(t, x);
    double s = std::sin(ph), c = std::cos(ph);
    fx += (m.eps * s) * t.amp;
    double cc = m.eps * kTwoPi * c;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) df(i, j) += cc * t.amp[i] * t.k[j];
  }
}

Vec3 inverse_lift(const AnosovMap& m, const Vec3& y, double tol) {
  if (!(tol > 0)) throw Error(Code::InvalidArgument, "inverse: tol must be positive");
  Vec3 x = m.Ainv_d * y;
  if (m.eps == 0.0) return x;
  Vec3 fx;
  Mat3 df;
  eval_with_jacobian(m, x, fx, df);
  Vec3 r = fx - y;
  double rn = r.norm();
  double scale = std::max(1.0, y.lpNorm<Eigen::Infinity>());
  int polish = 0;
  for (int it = 0; it < 50; ++it) {
    if (rn <= tol) {
      // one extra step to reach rounding level
      if (polish++ >= 1 || rn <= 4e-16 * scale) return x;
    }
    Vec3 step = df.partialPivLu().solve(r);
    double lam = 1.0;
    for (int h = 0; h < 12; ++h) {
      Vec3 xn = x - lam * step;
      Vec3 fn;
      Mat3 dn;
      eval_with_jacobian(m, xn, fn, dn);
      Vec3 rn_v = fn - y;
      double nn = rn_v.norm();
      if (nn < rn || h == 11 || rn <= tol) {
        x = xn;
        fx = fn;
        df = dn;
        r = rn_v;
        rn = nn;
        break;
      }
      lam *= 0.5;
    }
  }
  if (rn <= tol) return x;
  std::ostringstream os;
  os << "inverse: Newton failed, residual " << rn;
  throw Error(Code::NoConvergence, os.str());
}

Vec3 inverse(const AnosovMap& m, const Vec3& y, double tol) { return mod1(inverse_lift(m, y, tol)); }

namespace {

// Largest angle (in eigen-coordinates) between M applied to the boundary of a
// cone around `axis` and the axis, over the aperture.
double line_cone_ratio(const Mat3& Mc, int axis, double ap) {
  int p = (axis + 1) % 3, q = (axis + 2) % 3;
  double worst = 0.0;
  for (int k = 0; k < 32; ++k) {
    double phi = kTwoPi * k / 32.0;
    Vec3 v = Vec3::Zero();
    v[axis] = std::cos(ap);
    v[p] = std::sin(ap) * std::cos(phi);
    v[q] = std::sin(ap) * std::sin(phi);
    Vec3 w = Mc * v;
    double perp = std::hypot(w[p], w[q]);
    double ang = std::atan2(perp, std::abs(w[axis]));
    if (w[axis] * v[axis] <= 0) ang = M_PI;  // flipped out of the cone
    worst = std::max(worst, ang / ap);
  }
  return worst;
}

// Same for a cone around the coordinate plane orthogonal to `normal_axis`.
double plane_cone_ratio(const Mat3& Mc, int normal_axis, double ap) {
  int p = (normal_axis + 1) % 3, q = (normal_axis + 2) % 3;
  double worst = 0.0;
  for (int k = 0; k < 32; ++k) {
    double phi = kTwoPi * k / 32.0;
    for (int sgn = -1; sgn <= 1; sgn += 2) {
      Vec3 v;
      v[p] = std::cos(ap) * std::cos(phi);
      v[q] = std::cos(ap) * std::sin(phi);
      v[normal_axis] = sgn * std::sin(ap);
      Vec3 w = Mc * v;
      double ang = std::atan2(std::abs(w[normal_axis]), std::hypot(w[p], w[q]));
      worst = std::max(worst, ang / ap);
    }
  }
  return worst;
}

}  // namespace

ValidationReport validate(const AnosovMap& m, int grid_n, double aperture) {
  if (grid_n < 8) throw Error(Code::InvalidArgument, "validate: grid_n must be >= 8");
  if (!(aperture > 0 && aperture < 1.5)) throw Error(Code::InvalidArgument, "validate: bad aperture");
  ValidationReport rep;
  rep.grid_n = grid_n;
  rep.aperture = aperture;
  rep.min_det = 1e300;
  rep.max_det = -1e300;
  const Mat3& B = m.lin.basis;
  const Mat3& Bi = m.lin.basis_inv;
  std::ostringstream bad;
  Code bad_code = Code::Ok;
  for (int i = 0; i < grid_n && bad_code == Code::Ok; ++i)
    for (int j = 0; j < grid_n && bad_code == Code::Ok; ++j)
      for (int k = 0; k < grid_n; ++k) {
        Vec3 x(double(i) / grid_n, double(j) / grid_n, double(k) / grid_n);
        Mat3 J = jacobian(m, x);
        double d = J.determinant();
        rep.min_det = std::min(rep.min_det, d);
        rep.max_det = std::max(rep.max_det, d);
        if (d <= 0) {
          bad_code = Code::NotDiffeomorphism;
          bad << "det(df) = " << d << " <= 0 at (" << x[0] << "," << x[1] << "," << x[2] << ")";
          break;
        }
        Mat3 F = Bi * J * B;  // df in eigen-coordinates
        Mat3 G = F.inverse();
        double ru = line_cone_ratio(F, 2, aperture);
        double rcu = plane_cone_ratio(F, 0, aperture);
        double rs = line_cone_ratio(G, 0, aperture);
        double rcs = plane_cone_ratio(G, 2, aperture);
        rep.u_cone_ratio = std::max(rep.u_cone_ratio, ru);
        rep.cu_cone_ratio = std::max(rep.cu_cone_ratio, rcu);
        rep.s_cone_ratio = std::max(rep.s_cone_ratio, rs);
        rep.cs_cone_ratio = std::max(rep.cs_cone_ratio, rcs);
        if (ru >= 1 || rcu >= 1 || rs >= 1 || rcs >= 1) {
          bad_code = Code::ConeViolation;
          bad << "cone not strictly invariant at (" << x[0] << "," << x[1] << "," << x[2]
              << "): ratios u=" << ru << " cu=" << rcu << " s=" << rs << " cs=" << rcs;
          break;
        }
      }
  if (bad_code != Code::Ok) throw Error(bad_code, bad.str());
  return rep;
}

}  // namespace an3
