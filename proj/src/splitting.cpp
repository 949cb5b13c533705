#include "splitting.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

namespace an3 {

namespace {

inline Vec3 unit(const Vec3& v) { return v / v.norm(); }

inline Vec3 orient(const Vec3& v, const Vec3& ref) { return v.dot(ref) < 0 ? Vec3(-v) : v; }

}  // namespace

SplittingFrame splitting_frame(const AnosovMap& m, const Vec3& x0, int n_iter, double tol) {
  if (n_iter < 1) throw Error(Code::InvalidArgument, "splitting_frame: n_iter must be >= 1");
  const int n = n_iter;
  const LinearData& L = m.lin;
  Vec3 x = mod1(x0);
  SplittingFrame fr;
  fr.point = x;

  // forward orbit and derivatives
  std::vector<Mat3> Jf(n), Jb(n);
  Vec3 y = x;
  for (int k = 0; k < n; ++k) {
    Vec3 fy;
    eval_with_jacobian(m, y, fy, Jf[k]);
    y = mod1(fy);
  }
  // backward orbit; Jb[k] = df at f^{-(k+1)}x
  y = x;
  for (int k = 0; k < n; ++k) {
    y = inverse(m, y);
    Jb[k] = jacobian(m, y);
  }

  auto push_u = [&](int len) {
    Vec3 v = L.e[2];
    for (int k = len - 1; k >= 0; --k) v = unit(Jb[k] * v);
    return orient(v, L.e[2]);
  };
  auto push_ncu = [&](int len) {
    Vec3 w = L.dual[0];
    for (int k = len - 1; k >= 0; --k) w = unit(Jb[k].transpose().partialPivLu().solve(w));
    return orient(w, L.dual[0]);
  };
  auto pull_s = [&](int len) {
    Vec3 v = L.e[0];
    for (int k = len - 1; k >= 0; --k) v = unit(Jf[k].partialPivLu().solve(v));
    return orient(v, L.e[0]);
  };
  auto pull_ncs = [&](int len) {
    Vec3 w = L.dual[2];
    for (int k = len - 1; k >= 0; --k) w = unit(Jf[k].transpose() * w);
    return orient(w, L.dual[2]);
  };

  Vec3 eu = push_u(n), ncu = push_ncu(n), es = pull_s(n), ncs = pull_ncs(n);
  Vec3 eu1 = push_u(n - 1), ncu1 = push_ncu(n - 1), es1 = pull_s(n - 1), ncs1 = pull_ncs(n - 1);
  double inc = std::max({(eu - eu1).norm(), (ncu - ncu1).norm(), (es - es1).norm(), (ncs - ncs1).norm()});
  fr.cauchy = inc;
  if (!(inc <= tol)) {
    std::ostringstream os;
    os << "splitting_frame: Cauchy increment " << inc << " > tol " << tol << " with n_iter " << n;
    throw Error(Code::NoConvergence, os.str());
  }
  Vec3 ec = orient(unit(ncu.cross(ncs)), L.e[1]);
  Mat3 F;
  F.col(0) = es;
  F.col(1) = ec;
  F.col(2) = eu;
  if (std::abs(F.determinant()) < 1e-3)
    throw Error(Code::DegenerateFrame, "splitting_frame: frame nearly degenerate");
  fr.e_s = es;
  fr.e_c = ec;
  fr.e_u = eu;
  fr.n_cs = ncs;
  fr.n_cu = ncu;
  fr.rate_s = (Jf[0] * es).norm();
  fr.rate_c = (Jf[0] * ec).norm();
  fr.rate_u = (Jf[0] * eu).norm();
  return fr;
}

double center_jacobian(const AnosovMap& m, const Vec3& x, int n_iter, double tol) {
  return -std::log(splitting_frame(m, x, n_iter, tol).rate_c);
}

RateBounds rate_bounds(const AnosovMap& m, int grid_n, int n_iter, double tol) {
  if (grid_n < 1) throw Error(Code::InvalidArgument, "rate_bounds: grid_n must be >= 1");
  RateBounds b;
  b.min_s = b.min_c = b.min_u = 1e300;
  b.max_s = b.max_c = b.max_u = -1e300;
  b.margin_s = b.margin_c = b.margin_cu = 1e300;
  for (int i = 0; i < grid_n; ++i)
    for (int j = 0; j < grid_n; ++j)
      for (int k = 0; k < grid_n; ++k) {
        Vec3 x(double(i) / grid_n, double(j) / grid_n, double(k) / grid_n);
        SplittingFrame f = splitting_frame(m, x, n_iter, tol);
        b.min_s = std::min(b.min_s, f.rate_s);
        b.max_s = std::max(b.max_s, f.rate_s);
        b.min_c = std::min(b.min_c, f.rate_c);
        b.max_c = std::max(b.max_c, f.rate_c);
        b.min_u = std::min(b.min_u, f.rate_u);
        b.max_u = std::max(b.max_u, f.rate_u);
        b.margin_s = std::min(b.margin_s, 1.0 - f.rate_s);
        b.margin_c = std::min(b.margin_c, f.rate_c - 1.0);
        b.margin_cu = std::min(b.margin_cu, f.rate_u - f.rate_c);
        if (!(f.rate_s < 1.0 && 1.0 < f.rate_c && f.rate_c < f.rate_u)) {
          std::ostringstream os;
          os << "rate order violated at (" << x[0] << "," << x[1] << "," << x[2] << "): " << f.rate_s
             << ", " << f.rate_c << ", " << f.rate_u;
          throw Error(Code::OrderViolation, os.str());
        }
      }
  b.dominated_uniformly = b.max_s < 1.0 && 1.0 < b.min_c && b.max_c < b.min_u;
  return b;
}

double cs_area_factor_inverse(const AnosovMap& m, const Vec3& w, int n_iter, double tol) {
  SplittingFrame fr = splitting_frame(m, w, n_iter, tol);
  Vec3 wp = inverse(m, w);
  Mat3 J = jacobian(m, wp);
  // df^{-1} = J^{-1}; its cofactor maps the unit normal n to det(J)^{-1} J^T n
  return (J.transpose() * fr.n_cs).norm() / std::abs(J.determinant());
}

}  // namespace an3
