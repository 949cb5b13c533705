#pragma once

#include "thermo.hpp"
#include "unstable_geometry.hpp"

#include <vector>

namespace an3 {

struct MargulisOptions {
  int bins = 16;
  double max_seg = 0.02;
  int depth = 10;
  int grid = 12;  // cs-grid nodes per side
};

// nu^n(S) = lambda_u^{-n} length(F^n S) on bins of W^u(base) of total arclength `window`
struct LeafDensity {
  Vec3 base;
  double window = 0;
  int n = 0;
  int depth = 10;  // chart depth used for params
  std::vector<double> edges;      // arclength from base
  std::vector<double> params;     // chart parameters of the edges
  std::vector<double> mass;       // nu^n per bin
  std::vector<double> mass_next;  // nu^{n+1} per bin
  std::vector<double> density;    // mass / bin length
};

LeafDensity u_density_iterate(const AnosovMap& m, const Vec3& x, double window, int n, const MargulisOptions& opt = {});

// max |nu^{n+1}(S)/nu^n(S) - 1| over bins and adjacent bin pairs
double u_scaling_residual(const LeafDensity& d);

struct CsPatch {
  Vec3 base;
  double radius = 0;
  int grid = 0;
  std::vector<Vec3> vertices;  // torus points, grid x grid row-major
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> centroid;   // leaf point over the chart centroid
  std::vector<Vec3> normal;     // leaf normal there
  std::vector<double> area;     // flat triangle area
};

CsPatch make_cs_patch(const AnosovMap& m, const Vec3& x, double radius, int grid = 12);

struct ThetaValue {
  int n = 0;
  double value = 0;  // lambda_u^{-n} sum g(c) J_n(c) area
  double prev = 0;   // same at n-1
};

ThetaValue theta_cs_measure(const AnosovMap& m, const CsPatch& patch, const Observable& g, int n);
// |theta^{n-1}(1) / theta^n(1) - 1|
double theta_scaling_residual(const AnosovMap& m, const CsPatch& patch, int n);

// area factor of f^{-n} on the plane with unit normal `nrm` at w, and of f^{-(n-1)}
double cs_jacobian_backward(const AnosovMap& m, const Vec3& w, const Vec3& nrm, int n, double* prev = nullptr);

struct HolonomyResidual {
  double value = 0;
  int n = 0;
  double u_radius = 0;
  double cs_radius = 0;
  std::vector<double> per_test;  // per bin (cs) or per test function (u)
};

HolonomyResidual cs_invariance_residual(const AnosovMap& m, const Rectangle& R, int n, const MargulisOptions& opt = {});
HolonomyResidual u_invariance_residual(const AnosovMap& m, const Rectangle& R, int n, const MargulisOptions& opt = {});

struct OmegaResult {
  double value = 0;
  int terms = 0;
  double tail_bound = 0;
  double ratio = 0;  // last observed increment ratio
};

OmegaResult omega_center_density(const AnosovMap& m, const Vec3& z, const Vec3& y, double tol = 1e-6);

struct LocalProductResult {
  double residual = 0;
  std::vector<double> product;  // normalized product integrals per test function
  std::vector<double> bowen;    // normalized Bowen sums
  double bump_radius = 0;
  long long points_in_support = 0;
};

// compares the u x cs product integral on R against Bowen sums over `set` for
// bump * (1 + 0.5 cos(2 pi k.x)) with the given wavevectors
LocalProductResult local_product_residual(const AnosovMap& m, const Rectangle& R, int n, const PeriodicSet& set,
                                          const std::vector<std::array<int, 3>>& ks, const MargulisOptions& opt = {});

}  // namespace an3
