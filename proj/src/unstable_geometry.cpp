#include "unstable_geometry.hpp"

#include <algorithm>
#include <sstream>

namespace an3 {

UChart make_uchart(const AnosovMap& m, const Vec3& x, int depth) {
  if (depth < 1) throw Error(Code::InvalidArgument, "make_uchart: depth must be >= 1");
  UChart c;
  c.depth = depth;
  c.base = mod1(x);
  c.back.resize(depth + 1);
  c.back[0] = c.base;
  for (int j = 1; j <= depth; ++j) {
    c.back[j] = inverse(m, c.back[j - 1]);
  }
  c.dir = splitting_frame(m, c.back[depth]).e_u;
  Vec3 v = c.dir;
  for (int j = depth; j >= 1; --j) v = jacobian(m, c.back[j]) * v;
  c.scale = 1.0 / v.norm();
  c.e_u = v * c.scale;
  return c;
}

Vec3 uchart_point(const AnosovMap& m, const UChart& c, double s) {
  Vec3 d = (s * c.scale) * c.dir;
  for (int j = c.depth; j >= 1; --j) d = eval_delta(m, c.back[j], d);
  return c.base + d;
}

void uchart_point_tangent(const AnosovMap& m, const UChart& c, double s, Vec3& p, Vec3& dp) {
  Vec3 d = (s * c.scale) * c.dir;
  Vec3 v = c.scale * c.dir;
  for (int j = c.depth; j >= 1; --j) {
    Mat3 J;
    d = eval_delta(m, c.back[j], d, &J);
    v = J * v;
  }
  p = c.base + d;
  dp = v;
}

namespace {

double chart_arclength(const AnosovMap& m, const UChart& c, double s) {
  const int N = 256;
  double len = 0;
  Vec3 prev = uchart_point(m, c, 0.0);
  for (int i = 1; i <= N; ++i) {
    Vec3 p = uchart_point(m, c, s * i / N);
    len += (p - prev).norm();
    prev = p;
  }
  return len;
}

Vec3 push_level(const AnosovMap& m, const UChart& c, double s, int level) {
  Vec3 p = uchart_point(m, c, s);
  for (int l = 0; l < level; ++l) p = eval_lift(m, p);
  return p;
}

// Refine the polyline at `level` so that no segment exceeds max_seg.
void refine(const AnosovMap& m, const UChart& c, int level, double max_seg, std::vector<double>& s,
            std::vector<Vec3>& p) {
  std::vector<double> ns;
  std::vector<Vec3> np;
  ns.reserve(s.size() * 2);
  np.reserve(s.size() * 2);
  auto insert = [&](auto&& self, double sa, const Vec3& pa, double sb, const Vec3& pb, int guard) -> void {
    if ((pb - pa).norm() <= max_seg) return;
    double sm = 0.5 * (sa + sb);
    if (guard > 60 || sm == sa || sm == sb) throw Error(Code::NoConvergence, "curve refinement exhausted parameter resolution");
    Vec3 pm = push_level(m, c, sm, level);
    self(self, sa, pa, sm, pm, guard + 1);
    ns.push_back(sm);
    np.push_back(pm);
    self(self, sm, pm, sb, pb, guard + 1);
  };
  for (size_t i = 0; i + 1 < s.size(); ++i) {
    ns.push_back(s[i]);
    np.push_back(p[i]);
    insert(insert, s[i], p[i], s[i + 1], p[i + 1], 0);
  }
  ns.push_back(s.back());
  np.push_back(p.back());
  s.swap(ns);
  p.swap(np);
}

double polyline_length(const std::vector<Vec3>& p) {
  double L = 0;
  for (size_t i = 1; i < p.size(); ++i) L += (p[i] - p[i - 1]).norm();
  return L;
}

// Grow chart[s_a, s_b] to level n; lengths[l] += length at level l.
void grow_piece(const AnosovMap& m, const UChart& c, double s_a, double s_b, int n, double max_seg, double budget,
                std::vector<double>& lengths, std::vector<double>* keep_s, std::vector<Vec3>* keep_p) {
  std::vector<double> s{s_a, s_b};
  std::vector<Vec3> p{uchart_point(m, c, s_a), uchart_point(m, c, s_b)};
  refine(m, c, 0, max_seg, s, p);
  lengths[0] += polyline_length(p);
  for (int l = 1; l <= n; ++l) {
    for (auto& v : p) v = eval_lift(m, v);
    double est = polyline_length(p);
    if (est > budget) {
      std::ostringstream os;
      os << "curve length " << est << " exceeds budget " << budget << " at level " << l;
      throw Error(Code::BudgetExceeded, os.str());
    }
    refine(m, c, l, max_seg, s, p);
    lengths[l] += polyline_length(p);
  }
  if (keep_s) keep_s->swap(s);
  if (keep_p) keep_p->swap(p);
}

}  // namespace

double uchart_param_at_arclength(const AnosovMap& m, const UChart& c, double ell) {
  if (ell == 0.0) return 0.0;
  double s = ell;
  for (int it = 0; it < 6; ++it) {
    double a = chart_arclength(m, c, s);
    double ns = s * std::abs(ell) / a;
    if (std::abs(ns - s) <= 1e-15 * std::abs(ell)) return ns;
    s = ns;
  }
  return s;
}

UnstableCurve grow_curve(const AnosovMap& m, const Vec3& x, double delta, int n, const CurveOptions& opt) {
  if (!(delta > 0) || n < 0 || !(opt.max_seg > 0))
    throw Error(Code::InvalidArgument, "grow_curve: need delta > 0, n >= 0, max_seg > 0");
  UChart c = make_uchart(m, x, opt.depth);
  double s_lo = uchart_param_at_arclength(m, c, -delta);
  double s_hi = uchart_param_at_arclength(m, c, delta);
  UnstableCurve cur;
  cur.base = c.base;
  cur.delta = delta;
  cur.n = n;
  std::vector<double> lengths(n + 1, 0.0);
  grow_piece(m, c, s_lo, s_hi, n, opt.max_seg, opt.length_budget, lengths, &cur.params, &cur.vertices);
  cur.cumulative_length.resize(cur.vertices.size());
  double acc = 0;
  cur.cumulative_length[0] = 0;
  for (size_t i = 1; i < cur.vertices.size(); ++i) {
    acc += (cur.vertices[i] - cur.vertices[i - 1]).norm();
    cur.cumulative_length[i] = acc;
  }
  // tangent drift on a few interior vertices
  const size_t V = cur.vertices.size();
  if (V >= 3 && opt.tangent_samples > 0) {
    for (int k = 1; k <= opt.tangent_samples; ++k) {
      size_t i = 1 + (V - 3) * k / (opt.tangent_samples + 1);
      Vec3 chord = cur.vertices[i + 1] - cur.vertices[i - 1];
      Vec3 eu = splitting_frame(m, mod1(cur.vertices[i])).e_u;
      double cosang = std::min(1.0, std::abs(chord.normalized().dot(eu)));
      double ang = std::acos(cosang);
      if (ang > opt.tangent_tol) {
        std::ostringstream os;
        os << "vertex tangent deviates from e_u by " << ang << " rad at level " << n;
        throw Error(Code::TangentDrift, os.str());
      }
    }
  }
  return cur;
}

std::vector<double> push_lengths(const AnosovMap& m, const UChart& c, double s_a, double s_b, int n, double max_seg,
                                 double budget) {
  if (n < 0 || !(max_seg > 0)) throw Error(Code::InvalidArgument, "push_lengths: need n >= 0 and max_seg > 0");
  std::vector<double> lengths(n + 1, 0.0);
  if (s_a == s_b) return lengths;
  // keep each piece to about a million vertices at the top level
  double grow = std::pow(m.lin.lam[2] * 1.1, n);
  double piece = std::max(max_seg, 1e6 * max_seg / grow);
  double span = std::abs(s_b - s_a);
  int pieces = std::max(1, (int)std::ceil(span / piece));
  for (int i = 0; i < pieces; ++i) {
    double a = s_a + (s_b - s_a) * i / pieces;
    double b = i + 1 == pieces ? s_b : s_a + (s_b - s_a) * (i + 1) / pieces;
    grow_piece(m, c, a, b, n, max_seg, budget, lengths, nullptr, nullptr);
    if (lengths[n] > budget) throw Error(Code::BudgetExceeded, "push_lengths: total length exceeds budget");
  }
  return lengths;
}

EntropyEstimate entropy_estimate(const AnosovMap& m, const Vec3& x, double delta, int n_max, const CurveOptions& opt) {
  if (n_max < 2) throw Error(Code::InvalidArgument, "entropy_estimate: n_max must be >= 2");
  UChart c = make_uchart(m, x, opt.depth);
  double s_lo = uchart_param_at_arclength(m, c, -delta);
  double s_hi = uchart_param_at_arclength(m, c, delta);
  EntropyEstimate e;
  e.lengths = push_lengths(m, c, s_lo, s_hi, n_max, opt.max_seg, opt.length_budget);
  e.fit_from = n_max / 2;
  auto fit = [&](int a, int b, double& se) {
    int k = b - a + 1;
    double mx = 0, my = 0;
    for (int n = a; n <= b; ++n) {
      mx += n;
      my += std::log(e.lengths[n]);
    }
    mx /= k;
    my /= k;
    double sxx = 0, sxy = 0;
    for (int n = a; n <= b; ++n) {
      sxx += (n - mx) * (n - mx);
      sxy += (n - mx) * (std::log(e.lengths[n]) - my);
    }
    double slope = sxy / sxx;
    double rss = 0;
    for (int n = a; n <= b; ++n) {
      double r = std::log(e.lengths[n]) - my - slope * (n - mx);
      rss += r * r;
    }
    se = k > 2 ? std::sqrt(rss / (k - 2) / sxx) : 0.0;
    return slope;
  };
  double se = 0, se2 = 0;
  e.value = fit(e.fit_from, n_max, se);
  e.error = se;
  if (n_max - e.fit_from >= 3) {
    double s2 = fit(e.fit_from, n_max - 1, se2);
    e.error = std::max(se, std::abs(e.value - s2));
  }
  return e;
}

double quasi_isometry_constant(const UnstableCurve& c, int samples, uint64_t seed) {
  const size_t V = c.vertices.size();
  if (V < 2) return 0.0;
  SplitMix rng(seed);
  double C = 0;
  for (int k = 0; k < samples; ++k) {
    size_t i = rng.next() % V, j = rng.next() % V;
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    double du = c.cumulative_length[j] - c.cumulative_length[i];
    double d = (c.vertices[j] - c.vertices[i]).norm();
    C = std::max(C, du / (d + 1.0));
  }
  // endpoints
  double du = c.length(), d = (c.vertices.back() - c.vertices.front()).norm();
  return std::max(C, du / (d + 1.0));
}

CsShooter make_cs_shooter(const AnosovMap& m, const Vec3& x, int steps) {
  if (steps < 2) throw Error(Code::InvalidArgument, "make_cs_shooter: steps must be >= 2");
  CsShooter s;
  s.base = mod1(x);
  s.steps = steps;
  s.orbit.resize(steps + 1);
  s.orbit[0] = s.base;
  for (int k = 0; k < steps; ++k) s.orbit[k + 1] = eval(m, s.orbit[k]);
  return s;
}

namespace {

double fwd_residual(const AnosovMap& m, const CsShooter& sh, int n, const Vec3& d0, Vec3* grad) {
  Vec3 d = d0;
  Mat3 M = Mat3::Identity();
  for (int k = 0; k < n; ++k) {
    Mat3 J;
    d = eval_delta(m, sh.orbit[k], d, &J);
    if (grad) M = J * M;
  }
  double sc = std::pow(m.lin.lam[2], -n);
  const Vec3& lu = m.lin.dual[2];
  if (grad) *grad = sc * (M.transpose() * lu);
  return sc * lu.dot(d);
}

// staged Newton on t for d(t) = base + t*dir
double solve_forward(const AnosovMap& m, const CsShooter& sh, const Vec3& base, const Vec3& dir, double t0, double tol,
                     double* gap) {
  double t = t0;
  for (int n = 2; n <= sh.steps; n = std::min(sh.steps, n + 2)) {
    bool ok = false;
    for (int it = 0; it < 40; ++it) {
      Vec3 g;
      double r = fwd_residual(m, sh, n, base + t * dir, &g);
      double dr = g.dot(dir);
      if (!(std::abs(dr) > 1e-300)) break;
      double dt = r / dr;
      dt = std::clamp(dt, -0.25, 0.25);
      t -= dt;
      if (gap) *gap = std::abs(r);
      if (std::abs(dt) <= tol * (1.0 + std::abs(t))) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      std::ostringstream os;
      os << "cs-leaf shooting did not converge at stage " << n;
      throw Error(Code::NoConvergence, os.str());
    }
    if (n == sh.steps) break;
  }
  return t;
}

}  // namespace

double cs_residual(const AnosovMap& m, const CsShooter& sh, const Vec3& d, Vec3* grad) {
  return fwd_residual(m, sh, sh.steps, d, grad);
}

Vec3 cs_leaf_offset(const AnosovMap& m, const CsShooter& sh, double a, double b, double tol) {
  const auto& e = m.lin.e;
  Vec3 base = a * e[0] + b * e[1];
  double t = solve_forward(m, sh, base, e[2], 0.0, tol, nullptr);
  return base + t * e[2];
}

Vec3 cs_leaf_point(const AnosovMap& m, const Vec3& x, double a, double b) {
  CsShooter sh = make_cs_shooter(m, x);
  return mod1(sh.base + cs_leaf_offset(m, sh, a, b));
}

Vec3 cs_leaf_normal(const AnosovMap& m, const CsShooter& sh, double a, double b, double* area_element,
                    Vec3* offset) {
  const auto& e = m.lin.e;
  Vec3 d = cs_leaf_offset(m, sh, a, b);
  Vec3 g;
  cs_residual(m, sh, d, &g);
  double gu = g.dot(e[2]);
  Vec3 ta = e[0] - (g.dot(e[0]) / gu) * e[2];
  Vec3 tb = e[1] - (g.dot(e[1]) / gu) * e[2];
  Vec3 cr = ta.cross(tb);
  if (area_element) *area_element = cr.norm();
  if (offset) *offset = d;
  Vec3 nrm = cr.normalized();
  return nrm.dot(m.lin.dual[2]) < 0 ? Vec3(-nrm) : nrm;
}

Vec3 center_leaf_offset(const AnosovMap& m, const Vec3& z, double c, int steps, double tol) {
  if (steps < 2) throw Error(Code::InvalidArgument, "center_leaf_offset: steps must be >= 2");
  const auto& e = m.lin.e;
  CsShooter fw = make_cs_shooter(m, z, steps);
  std::vector<Vec3> bo(steps + 1), ib(steps);
  bo[0] = mod1(z);
  for (int k = 0; k < steps; ++k) {
    ib[k] = inverse_lift(m, bo[k]);
    bo[k + 1] = mod1(ib[k]);
  }
  auto bwd = [&](int n, const Vec3& d0, Vec3& grad) {
    Vec3 d = d0;
    Mat3 M = Mat3::Identity();
    for (int k = 0; k < n; ++k) {
      Mat3 J;
      Vec3 e = inverse_delta(m, ib[k], d, &J);
      M = J.partialPivLu().solve(M);
      d = e;
    }
    double sc = std::pow(m.lin.lam[0], n);
    grad = sc * (M.transpose() * m.lin.dual[0]);
    return sc * m.lin.dual[0].dot(d);
  };
  double a = 0, t = 0;
  for (int n = 2; n <= steps; n = std::min(steps, n + 2)) {
    bool ok = false;
    for (int it = 0; it < 40; ++it) {
      Vec3 d = a * e[0] + c * e[1] + t * e[2];
      Vec3 g1, g2;
      double r1 = fwd_residual(m, fw, n, d, &g1);
      double r2 = bwd(n, d, g2);
      Eigen::Matrix2d J;
      J << g1.dot(e[0]), g1.dot(e[2]), g2.dot(e[0]), g2.dot(e[2]);
      Eigen::Vector2d step = J.partialPivLu().solve(Eigen::Vector2d(r1, r2));
      if (!step.allFinite()) break;
      double mx = step.lpNorm<Eigen::Infinity>();
      if (mx > 0.25) step *= 0.25 / mx;
      a -= step[0];
      t -= step[1];
      if (mx <= tol * (1.0 + std::abs(a) + std::abs(t))) {
        ok = true;
        break;
      }
    }
    if (!ok) throw Error(Code::NoConvergence, "center leaf shooting did not converge");
    if (n == steps) break;
  }
  return a * e[0] + c * e[1] + t * e[2];
}

BracketResult bracket_charts(const AnosovMap& m, const CsShooter& sx, const UChart& cy, double tol, double eps0) {
  Vec3 d0 = torus_delta(sx.base, cy.base);
  if (d0.norm() > eps0) {
    std::ostringstream os;
    os << "bracket: points " << d0.norm() << " apart, beyond eps0 " << eps0;
    throw Error(Code::NoIntersection, os.str());
  }
  const Vec3& lu = m.lin.dual[2];
  double t = -lu.dot(d0) / lu.dot(cy.e_u);
  Vec3 lift_y = sx.base + d0;  // lift of y near x
  auto disp = [&](double s, Vec3& dp) {
    Vec3 p;
    uchart_point_tangent(m, cy, s, p, dp);
    return Vec3(lift_y + (p - cy.base) - sx.base);
  };
  double gap = 0;
  for (int n = 2; n <= sx.steps; n = std::min(sx.steps, n + 2)) {
    bool ok = false;
    for (int it = 0; it < 40; ++it) {
      Vec3 dp;
      Vec3 d = disp(t, dp);
      Vec3 g;
      double r = fwd_residual(m, sx, n, d, &g);
      double dr = g.dot(dp);
      if (!(std::abs(dr) > 1e-300)) break;
      double dt = std::clamp(r / dr, -0.25, 0.25);
      t -= dt;
      gap = std::abs(r);
      if (std::abs(t) > 4 * eps0) throw Error(Code::NoIntersection, "bracket: intersection left the chart");
      if (std::abs(dt) <= tol * (1.0 + std::abs(t))) {
        ok = true;
        break;
      }
    }
    if (!ok) throw Error(Code::NoConvergence, "bracket: shooting did not converge");
    if (n == sx.steps) break;
  }
  BracketResult br;
  br.t = t;
  br.point = mod1(uchart_point(m, cy, t));
  br.cs_gap = gap;
  return br;
}

Vec3 bracket(const AnosovMap& m, const Vec3& x, const Vec3& y, double tol, double eps0) {
  if (torus_dist(x, y) > eps0) throw Error(Code::NoIntersection, "bracket: points beyond eps0");
  CsShooter sx = make_cs_shooter(m, x);
  UChart cy = make_uchart(m, y);
  return bracket_charts(m, sx, cy, tol, eps0).point;
}

Rectangle make_rectangle(const AnosovMap& m, const Vec3& center, double u_radius, double cs_radius) {
  if (!(u_radius > 0) || !(cs_radius > 0)) throw Error(Code::InvalidArgument, "make_rectangle: radii must be positive");
  Rectangle R;
  R.center = mod1(center);
  R.u_radius = u_radius;
  R.cs_radius = cs_radius;
  UChart c = make_uchart(m, R.center);
  R.u_ends[0] = mod1(uchart_point(m, c, uchart_param_at_arclength(m, c, -u_radius)));
  R.u_ends[1] = mod1(uchart_point(m, c, uchart_param_at_arclength(m, c, u_radius)));
  CsShooter sh = make_cs_shooter(m, R.center);
  int k = 0;
  for (int i : {-1, 1})
    for (int j : {-1, 1}) R.cs_corners[k++] = mod1(sh.base + cs_leaf_offset(m, sh, i * cs_radius, j * cs_radius));
  std::array<UChart, 2> ue{make_uchart(m, R.u_ends[0]), make_uchart(m, R.u_ends[1])};
  double defect = 0;
  k = 0;
  for (int q = 0; q < 4; ++q) {
    CsShooter sq = make_cs_shooter(m, R.cs_corners[q]);
    for (int p = 0; p < 2; ++p) {
      Vec3 z = bracket_charts(m, sq, ue[p]).point;
      R.corners[k++] = z;
      CsShooter sz = make_cs_shooter(m, z);
      Vec3 zz = bracket_charts(m, sz, ue[p]).point;
      defect = std::max(defect, torus_dist(z, zz));
    }
  }
  R.closure_defect = defect;
  return R;
}

namespace {

void check_in_rect(const Rectangle& R, const Vec3& x, const char* who) {
  if (torus_dist(x, R.center) > 2.0 * (R.u_radius + R.cs_radius)) {
    std::ostringstream os;
    os << who << ": point outside rectangle";
    throw Error(Code::InvalidArgument, os.str());
  }
}

}  // namespace

std::vector<Vec3> holonomy_cs(const AnosovMap& m, const Rectangle& R, const Vec3& x, const Vec3& y,
                              const std::vector<Vec3>& pts, std::vector<double>* params) {
  check_in_rect(R, x, "holonomy_cs");
  check_in_rect(R, y, "holonomy_cs");
  double eps0 = 4.0 * (R.u_radius + R.cs_radius);
  UChart cy = make_uchart(m, y);
  std::vector<Vec3> out;
  out.reserve(pts.size());
  if (params) params->clear();
  for (const auto& p : pts) {
    BracketResult b = bracket_charts(m, make_cs_shooter(m, p), cy, 1e-12, eps0);
    out.push_back(b.point);
    if (params) params->push_back(b.t);
  }
  return out;
}

std::vector<Vec3> holonomy_u(const AnosovMap& m, const Rectangle& R, const Vec3& x, const Vec3& y,
                             const std::vector<Vec3>& pts) {
  check_in_rect(R, x, "holonomy_u");
  check_in_rect(R, y, "holonomy_u");
  double eps0 = 4.0 * (R.u_radius + R.cs_radius);
  CsShooter sy = make_cs_shooter(m, y);
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(bracket_charts(m, sy, make_uchart(m, p), 1e-12, eps0).point);
  return out;
}

}  // namespace an3
