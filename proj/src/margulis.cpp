#include "margulis.hpp"

#include <algorithm>
#include <sstream>

namespace an3 {

namespace {

std::vector<double> edge_params(const AnosovMap& m, const UChart& c, const std::vector<double>& edges) {
  std::vector<double> p(edges.size());
  for (size_t i = 0; i < edges.size(); ++i) p[i] = uchart_param_at_arclength(m, c, edges[i]);
  return p;
}

std::vector<double> uniform_edges(double lo, double hi, int bins) {
  std::vector<double> e(bins + 1);
  for (int i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * i / bins;
  return e;
}

double max_ratio_defect(const std::vector<double>& num, const std::vector<double>& den) {
  double r = 0;
  for (size_t i = 0; i < num.size(); ++i) {
    r = std::max(r, std::abs(num[i] / den[i] - 1.0));
    if (i + 1 < num.size()) r = std::max(r, std::abs((num[i] + num[i + 1]) / (den[i] + den[i + 1]) - 1.0));
  }
  return r;
}

}  // namespace

LeafDensity u_density_iterate(const AnosovMap& m, const Vec3& x, double window, int n, const MargulisOptions& opt) {
  if (!(window > 0) || n < 0 || opt.bins < 1) throw Error(Code::InvalidArgument, "u_density_iterate: bad window, n or bins");
  LeafDensity d;
  d.base = mod1(x);
  d.window = window;
  d.n = n;
  d.depth = opt.depth;
  UChart c = make_uchart(m, d.base, opt.depth);
  d.edges = uniform_edges(-0.5 * window, 0.5 * window, opt.bins);
  d.params = edge_params(m, c, d.edges);
  const double lu = m.lin.lam[2];
  for (int i = 0; i < opt.bins; ++i) {
    auto L = push_lengths(m, c, d.params[i], d.params[i + 1], n + 1, opt.max_seg);
    d.mass.push_back(L[n] * std::pow(lu, -n));
    d.mass_next.push_back(L[n + 1] * std::pow(lu, -(n + 1)));
    d.density.push_back(d.mass.back() / (d.edges[i + 1] - d.edges[i]));
  }
  return d;
}

double u_scaling_residual(const LeafDensity& d) { return max_ratio_defect(d.mass_next, d.mass); }

double cs_jacobian_backward(const AnosovMap& m, const Vec3& w, const Vec3& nrm, int n, double* prev) {
  Vec3 b = nrm;
  Vec3 wj = mod1(w);
  if (prev) *prev = 1.0;
  for (int j = 1; j <= n; ++j) {
    if (prev && j == n) *prev = b.norm();
    wj = inverse(m, wj);
    Mat3 J = jacobian(m, wj);
    b = J.transpose() * b / J.determinant();
  }
  return b.norm();
}

CsPatch make_cs_patch(const AnosovMap& m, const Vec3& x, double radius, int grid) {
  if (!(radius > 0) || grid < 2) throw Error(Code::InvalidArgument, "make_cs_patch: need radius > 0 and grid >= 2");
  CsPatch p;
  p.base = mod1(x);
  p.radius = radius;
  p.grid = grid;
  CsShooter sh = make_cs_shooter(m, p.base);
  std::vector<Vec3> off(grid * grid);
  auto coord = [&](int i) { return -radius + 2.0 * radius * i / (grid - 1); };
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      off[i * grid + j] = cs_leaf_offset(m, sh, coord(i), coord(j));
      p.vertices.push_back(mod1(p.base + off[i * grid + j]));
    }
  auto add = [&](int a, int b, int c) {
    p.triangles.push_back({a, b, c});
    p.area.push_back(0.5 * (off[b] - off[a]).cross(off[c] - off[a]).norm());
    double ca = 0, cb = 0;
    for (int v : {a, b, c}) {
      ca += coord(v / grid) / 3.0;
      cb += coord(v % grid) / 3.0;
    }
    Vec3 o;
    p.normal.push_back(cs_leaf_normal(m, sh, ca, cb, nullptr, &o));
    p.centroid.push_back(mod1(p.base + o));
    if (!(p.area.back() > 0)) throw Error(Code::Internal, "make_cs_patch: degenerate triangle");
  };
  for (int i = 0; i + 1 < grid; ++i)
    for (int j = 0; j + 1 < grid; ++j) {
      int v00 = i * grid + j, v01 = v00 + 1, v10 = v00 + grid, v11 = v10 + 1;
      add(v00, v10, v11);
      add(v00, v11, v01);
    }
  return p;
}

ThetaValue theta_cs_measure(const AnosovMap& m, const CsPatch& patch, const Observable& g, int n) {
  if (n < 1) throw Error(Code::InvalidArgument, "theta_cs_measure: n must be >= 1");
  const double lu = m.lin.lam[2];
  long double v = 0, vp = 0;
  for (size_t t = 0; t < patch.triangles.size(); ++t) {
    double prev = 0;
    double Jn = cs_jacobian_backward(m, patch.centroid[t], patch.normal[t], n, &prev);
    double gc = g(patch.centroid[t]);
    v += gc * Jn * patch.area[t];
    vp += gc * prev * patch.area[t];
  }
  ThetaValue r;
  r.n = n;
  r.value = double(v) * std::pow(lu, -n);
  r.prev = double(vp) * std::pow(lu, -(n - 1));
  return r;
}

double theta_scaling_residual(const AnosovMap& m, const CsPatch& patch, int n) {
  ThetaValue t = theta_cs_measure(m, patch, observable_one(), n);
  return std::abs(t.prev / t.value - 1.0);
}

HolonomyResidual cs_invariance_residual(const AnosovMap& m, const Rectangle& R, int n, const MargulisOptions& opt) {
  HolonomyResidual h;
  h.n = n;
  h.u_radius = R.u_radius;
  h.cs_radius = R.cs_radius;
  const Vec3 x = R.center;
  CsShooter sx = make_cs_shooter(m, x);
  Vec3 z = mod1(x + cs_leaf_offset(m, sx, 0.5 * R.cs_radius, 0.5 * R.cs_radius));
  UChart cx = make_uchart(m, x, opt.depth);
  UChart cz = make_uchart(m, z, opt.depth);
  auto edges = uniform_edges(-R.u_radius, R.u_radius, opt.bins);
  auto px = edge_params(m, cx, edges);
  std::vector<Vec3> pts;
  for (double s : px) pts.push_back(mod1(uchart_point(m, cx, s)));
  std::vector<double> pz;
  holonomy_cs(m, R, x, z, pts, &pz);
  for (size_t i = 1; i < pz.size(); ++i)
    if ((pz[i] - pz[i - 1]) * (px[i] - px[i - 1]) <= 0)
      throw Error(Code::Internal, "cs holonomy is not monotone along the leaf");
  std::vector<double> mx, mz;
  for (int i = 0; i < opt.bins; ++i) {
    mx.push_back(push_lengths(m, cx, px[i], px[i + 1], n, opt.max_seg)[n]);
    mz.push_back(push_lengths(m, cz, pz[i], pz[i + 1], n, opt.max_seg)[n]);
    h.per_test.push_back(mz.back() / mx.back() - 1.0);
  }
  h.value = max_ratio_defect(mz, mx);
  return h;
}

HolonomyResidual u_invariance_residual(const AnosovMap& m, const Rectangle& R, int n, const MargulisOptions& opt) {
  HolonomyResidual h;
  h.n = n;
  h.u_radius = R.u_radius;
  h.cs_radius = R.cs_radius;
  const Vec3 x = R.center;
  UChart cx = make_uchart(m, x, opt.depth);
  Vec3 y = mod1(uchart_point(m, cx, uchart_param_at_arclength(m, cx, 0.5 * R.u_radius)));
  CsShooter sx = make_cs_shooter(m, x);
  CsShooter sy = make_cs_shooter(m, y);
  const int G = opt.grid;
  const double r = R.cs_radius, cell = (2 * r / G) * (2 * r / G);
  const double eps0 = 4.0 * (R.u_radius + R.cs_radius);
  const double hfd = 1e-4;
  // test functions: four quadrants and the whole patch
  std::array<long double, 5> sw{}, swe{};
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) {
      double a = -r + (i + 0.5) * 2 * r / G, b = -r + (j + 0.5) * 2 * r / G;
      double ael = 0;
      Vec3 off;
      Vec3 nrm = cs_leaf_normal(m, sx, a, b, &ael, &off);
      Vec3 z = mod1(x + off);
      double w = cs_jacobian_backward(m, z, nrm, n) * ael * cell;
      BracketResult br = bracket_charts(m, sy, make_uchart(m, z, opt.depth), 1e-12, eps0);
      double ell = br.t;
      Vec3 zj = z;
      long double T = 0;
      for (int j = 1; j < 200; ++j) {
        zj = inverse(m, zj);
        SplittingFrame fr = splitting_frame(m, zj);
        ell /= (jacobian(m, zj) * fr.e_u).norm();
        if (j < n) continue;
        if (std::abs(ell) < 1e-17) break;
        double jp = std::log(cs_area_factor_inverse(m, mod1(zj + hfd * fr.e_u)));
        double jm = std::log(cs_area_factor_inverse(m, mod1(zj - hfd * fr.e_u)));
        T -= ell * (jp - jm) / (2 * hfd);
      }
      double e = std::expm1(double(T));
      int quad = (a < 0 ? 0 : 1) + (b < 0 ? 0 : 2);
      for (int q : {quad, 4}) {
        sw[q] += w;
        swe[q] += w * e;
      }
    }
  h.value = 0;
  for (int q = 0; q < 5; ++q) {
    double v = std::abs(double(swe[q] / sw[q]));
    h.per_test.push_back(v);
    h.value = std::max(h.value, v);
  }
  return h;
}

OmegaResult omega_center_density(const AnosovMap& m, const Vec3& z, const Vec3& y, double tol) {
  if (!(tol > 0)) throw Error(Code::InvalidArgument, "omega_center_density: tol must be positive");
  const Vec3& lc = m.lin.dual[1];
  Vec3 zk = mod1(z);
  Vec3 d = torus_delta(zk, y);
  double c = lc.dot(d);
  Vec3 off = center_leaf_offset(m, zk, c);
  if ((off - d).norm() > std::max(1e-8, 10 * tol)) {
    std::ostringstream os;
    os << "omega_center_density: y is " << (off - d).norm() << " off the center leaf of z";
    throw Error(Code::InvalidArgument, os.str());
  }
  auto jc = [&](const Vec3& w) { return -std::log(splitting_frame(m, w).rate_c); };
  OmegaResult r;
  long double sum = 0;
  double last = 0;
  for (int k = 0; k < 300; ++k) {
    double term = (off.norm() == 0.0) ? 0.0 : jc(mod1(zk + off)) - jc(zk);
    sum += term;
    r.terms = k + 1;
    if (k > 0 && last != 0) r.ratio = std::abs(term / last);
    if (std::abs(term) < tol && k >= 2) {
      double q = std::min(r.ratio, 0.99);
      r.tail_bound = std::abs(term) * q / (1 - q);
      r.value = double(sum);
      return r;
    }
    last = term;
    // step back: difference through f^{-1} without cancellation
    Vec3 zb = inverse_lift(m, zk);
    Vec3 e = inverse_delta(m, zb, off);
    zk = mod1(zb);
    off = center_leaf_offset(m, zk, lc.dot(e));
  }
  throw Error(Code::NoConvergence, "omega_center_density: increments stalled above tol");
}

LocalProductResult local_product_residual(const AnosovMap& m, const Rectangle& R, int n, const PeriodicSet& set,
                                          const std::vector<std::array<int, 3>>& ks, const MargulisOptions& opt) {
  if (set.points.empty()) throw Error(Code::InvalidArgument, "local_product_residual: empty periodic set");
  LocalProductResult res;
  const Vec3 q = R.center;
  const double rho = 0.8 * std::min(R.u_radius, R.cs_radius);
  res.bump_radius = rho;
  const Mat3& Binv = m.lin.basis_inv;
  const size_t F = ks.size() + 1;
  auto phis = [&](const Vec3& dq, const Vec3& w, std::vector<double>& out) {
    double r2 = (Binv * dq).squaredNorm() / (rho * rho);
    out.assign(F, 0.0);
    if (r2 >= 1) return false;
    double bump = std::pow(1 - r2, 3);
    out[0] = bump;
    for (size_t k = 0; k < ks.size(); ++k) {
      double kx = ks[k][0] * w[0] + ks[k][1] * w[1] + ks[k][2] * w[2];
      out[k + 1] = bump * (1 + 0.5 * std::cos(kTwoPi * frac(kx)));
    }
    return true;
  };
  // product side
  const double lu = m.lin.lam[2];
  UChart cq = make_uchart(m, q, opt.depth);
  auto edges = uniform_edges(-R.u_radius, R.u_radius, opt.bins);
  auto pe = edge_params(m, cq, edges);
  const int G = opt.grid;
  const double r = R.cs_radius, cell = (2 * r / G) * (2 * r / G);
  std::vector<long double> prod(F, 0.0L), bow(F, 0.0L);
  std::vector<double> ph;
  for (int i = 0; i < opt.bins; ++i) {
    double mass = push_lengths(m, cq, pe[i], pe[i + 1], n, opt.max_seg)[n] * std::pow(lu, -n);
    Vec3 pi = uchart_point(m, cq, 0.5 * (pe[i] + pe[i + 1]));
    CsShooter sh = make_cs_shooter(m, pi);
    for (int a = 0; a < G; ++a)
      for (int b = 0; b < G; ++b) {
        double ca = -r + (a + 0.5) * 2 * r / G, cb = -r + (b + 0.5) * 2 * r / G;
        double ael = 0;
        Vec3 off;
        Vec3 nrm = cs_leaf_normal(m, sh, ca, cb, &ael, &off);
        Vec3 wl = pi + off;
        if (!phis(wl - q, mod1(wl), ph)) continue;
        double w = mass * cs_jacobian_backward(m, mod1(wl), nrm, n) * std::pow(lu, -n) * ael * cell;
        for (size_t k = 0; k < F; ++k) prod[k] += w * ph[k];
      }
  }
  // Bowen side
  for (const auto& p : set.points) {
    Vec3 dq = torus_delta(q, p.point);
    if (dq.lpNorm<Eigen::Infinity>() > 3 * rho) continue;
    if (!phis(dq, p.point, ph)) continue;
    ++res.points_in_support;
    long double w = std::exp((long double)p.jc_sum);
    for (size_t k = 0; k < F; ++k) bow[k] += w * ph[k];
  }
  if (!(prod[0] > 0) || !(bow[0] > 0))
    throw Error(Code::NormalizationDegenerate, "local_product_residual: bump integral vanishes");
  res.residual = 0;
  for (size_t k = 1; k < F; ++k) {
    double a = double(prod[k] / prod[0]), b = double(bow[k] / bow[0]);
    res.product.push_back(a);
    res.bowen.push_back(b);
    res.residual = std::max(res.residual, std::abs(a - b) / std::abs(b));
  }
  return res;
}

}  // namespace an3
