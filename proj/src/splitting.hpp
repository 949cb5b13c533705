#pragma once

#include "torus_maps.hpp"

namespace an3 {

struct SplittingFrame {
  Vec3 point;
  Vec3 e_s, e_c, e_u;
  double rate_s = 0, rate_c = 0, rate_u = 0;
  Vec3 n_cs;  // unit normal of E_c + E_s
  Vec3 n_cu;  // unit normal of E_c + E_u
  double cauchy = 0;  // increment between n_iter-1 and n_iter
};

SplittingFrame splitting_frame(const AnosovMap& m, const Vec3& x, int n_iter = 60, double tol = 1e-9);

double center_jacobian(const AnosovMap& m, const Vec3& x, int n_iter = 60, double tol = 1e-9);

struct RateBounds {
  double min_s = 0, max_s = 0, min_c = 0, max_c = 0, min_u = 0, max_u = 0;
  // min over grid of (1 - rate_s), (rate_c - 1), (rate_u - rate_c)
  double margin_s = 0, margin_c = 0, margin_cu = 0;
  bool dominated_uniformly = false;  // max rate_c < min rate_u and max rate_s < 1 < min rate_c
};

RateBounds rate_bounds(const AnosovMap& m, int grid_n = 16, int n_iter = 60, double tol = 1e-9);

// Area expansion of df^{-1} restricted to E_cs at w (cs-leaves are expanded by f^{-1}).
double cs_area_factor_inverse(const AnosovMap& m, const Vec3& w, int n_iter = 60, double tol = 1e-9);

}  // namespace an3
