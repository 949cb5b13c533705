#pragma once

#include "torus_maps.hpp"

#include <vector>

namespace an3 {

struct PeriodicPoint {
  Vec3 point;
  int period = 0;
  double jc_sum = 0.0;
};

// One f-orbit inside a period-n set; multipliers are the eigenvalues of
// df^n at any orbit point, ordered by modulus (s, c, u).
struct PeriodicOrbit {
  uint32_t first = 0;
  uint32_t length = 0;
  std::array<double, 3> mult{};
};

struct PeriodicSet {
  int period = 0;
  std::vector<PeriodicPoint> points;  // ordered by seed lattice index
  long long expected_count = 0;
  std::vector<PeriodicOrbit> orbits;
  std::vector<uint32_t> orbit_of;
  double max_seed_distance = 0.0;  // empirical conjugacy bound
  double max_residual = 0.0;
};

struct PeriodicOptions {
  long long budget = 20000000;
  int homotopy_steps = 10;
  double tol = 1e-11;
  double separation = 1e-6;
  int workers = 1;
  bool check_collisions = true;
};

long long lefschetz_count(const IMat3& A, int n);

PeriodicSet linear_periodic_points(const AnosovMap& m, int n, const PeriodicOptions& opt = {});
PeriodicSet continue_periodic_points(const AnosovMap& m, int n, const PeriodicOptions& opt = {});

// Smith normal form U*M*V = diag(d), d1 | d2 | d3 (exposed for tests)
struct Smith {
  std::array<__int128, 3> d{};
  std::array<std::array<__int128, 3>, 3> U{}, V{}, Vinv{};
};
Smith smith_normal_form(const IMat3& M);

}  // namespace an3
