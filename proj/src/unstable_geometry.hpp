#pragma once

#include "splitting.hpp"

#include <vector>

namespace an3 {

// Local chart of W^u(base): s -> F^depth(o + s*scale*dir) where o = f^{-depth}(base)
// and dir = e_u(o). The lift of base itself is `base`; scale makes s close to arclength.
struct UChart {
  Vec3 base;
  int depth = 10;
  std::vector<Vec3> back;   // back[j] = f^{-j}(base) mod 1
  Vec3 dir;
  double scale = 1.0;
  Vec3 e_u;  // at base
};

UChart make_uchart(const AnosovMap& m, const Vec3& x, int depth = 10);
Vec3 uchart_point(const AnosovMap& m, const UChart& c, double s);
// point and d/ds
void uchart_point_tangent(const AnosovMap& m, const UChart& c, double s, Vec3& p, Vec3& dp);

// chart parameter at signed arclength `ell` from base along W^u
double uchart_param_at_arclength(const AnosovMap& m, const UChart& c, double ell);

struct UnstableCurve {
  Vec3 base;
  double delta = 0;
  int n = 0;
  std::vector<double> params;  // seed chart parameter of each vertex
  std::vector<Vec3> vertices;  // on the lift
  std::vector<double> cumulative_length;
  double length() const { return cumulative_length.empty() ? 0.0 : cumulative_length.back(); }
};

struct CurveOptions {
  double max_seg = 1e-3;
  int depth = 10;
  double length_budget = 1e7;
  double tangent_tol = 2e-2;  // radians
  int tangent_samples = 16;
};

UnstableCurve grow_curve(const AnosovMap& m, const Vec3& x, double delta, int n, const CurveOptions& opt = {});

// Lengths of F^l(chart[s_a, s_b]) for l = 0..n without keeping the polylines.
std::vector<double> push_lengths(const AnosovMap& m, const UChart& c, double s_a, double s_b, int n,
                                 double max_seg, double budget = 1e9);

struct EntropyEstimate {
  double value = 0;
  double error = 0;
  std::vector<double> lengths;  // level 0..n_max
  int fit_from = 0;
};

EntropyEstimate entropy_estimate(const AnosovMap& m, const Vec3& x, double delta, int n_max,
                                 const CurveOptions& opt = {});

// C with d^u <= C d + C over sampled vertex pairs of the curve
double quasi_isometry_constant(const UnstableCurve& c, int samples = 4000, uint64_t seed = 7);

// Forward shooting data for the cs-leaf through x.
struct CsShooter {
  Vec3 base;
  int steps = 30;
  std::vector<Vec3> orbit;  // f^k(base) mod 1
};

CsShooter make_cs_shooter(const AnosovMap& m, const Vec3& x, int steps = 30);

// u-height residual lambda_u^{-n} l_u . (F^n(x+d) - F^n(x)) and its gradient in d
double cs_residual(const AnosovMap& m, const CsShooter& sh, const Vec3& d, Vec3* grad = nullptr);

// Displacement d with x + d on W^cs(x) and d = a e_s + b e_c + t e_u in the linear eigenbasis.
Vec3 cs_leaf_offset(const AnosovMap& m, const CsShooter& sh, double a, double b, double tol = 1e-14);
Vec3 cs_leaf_point(const AnosovMap& m, const Vec3& x, double a, double b);
// unit normal of the leaf at chart coordinates (a, b); area_element = |d_a x d_b|
Vec3 cs_leaf_normal(const AnosovMap& m, const CsShooter& sh, double a, double b, double* area_element = nullptr,
                    Vec3* offset = nullptr);

// Displacement to the point of W^c(z) whose linear center coordinate is c.
Vec3 center_leaf_offset(const AnosovMap& m, const Vec3& z, double c, int steps = 25, double tol = 1e-14);

struct BracketResult {
  Vec3 point;       // torus point
  double t = 0;     // parameter on the u-chart of y
  double cs_gap = 0;
};

// [x, y] = W^cs(x) cap W^u(y)
BracketResult bracket_charts(const AnosovMap& m, const CsShooter& sx, const UChart& cy, double tol = 1e-12,
                             double eps0 = 0.3);
Vec3 bracket(const AnosovMap& m, const Vec3& x, const Vec3& y, double tol = 1e-12, double eps0 = 0.3);

struct Rectangle {
  Vec3 center;
  double u_radius = 0.05;
  double cs_radius = 0.05;
  std::array<Vec3, 2> u_ends;     // W^u(center) at arclength -r, +r
  std::array<Vec3, 4> cs_corners; // W^cs(center) at (+-r, +-r)
  std::array<Vec3, 8> corners;    // [cs_corner, u_end]
  double closure_defect = 0;      // max |[[q,p],p] - [q,p]| over corners
};

Rectangle make_rectangle(const AnosovMap& m, const Vec3& center, double u_radius, double cs_radius);

// pts on W^u_R(x) -> [p, y] on W^u_R(y); params are chart parameters on y's chart
std::vector<Vec3> holonomy_cs(const AnosovMap& m, const Rectangle& R, const Vec3& x, const Vec3& y,
                              const std::vector<Vec3>& pts, std::vector<double>* params = nullptr);
// pts on W^cs_R(x) -> [y, p] on W^cs_R(y)
std::vector<Vec3> holonomy_u(const AnosovMap& m, const Rectangle& R, const Vec3& x, const Vec3& y,
                             const std::vector<Vec3>& pts);

}  // namespace an3
