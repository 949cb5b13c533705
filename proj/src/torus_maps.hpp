#pragma once

#include "common.hpp"

#include <vector>

namespace an3 {

struct TrigTerm {
  std::array<int, 3> k{0, 0, 0};
  Vec3 amp = Vec3::Zero();
  double phase = 0.0;
};

// Eigen-data of the homology action; index 0 = s, 1 = c, 2 = u.
struct LinearData {
  std::array<double, 3> lam{};
  std::array<Vec3, 3> e;     // unit eigenvectors
  std::array<Vec3, 3> dual;  // dual[i].dot(e[j]) = delta_ij
  Mat3 basis;                // columns e[0], e[1], e[2]
  Mat3 basis_inv;
};

struct AnosovMap {
  IMat3 A{};
  std::vector<TrigTerm> terms;
  double eps = 0.0;
  double L = 0.25;

  Mat3 Ad;
  IMat3 Ainv{};
  Mat3 Ainv_d;
  LinearData lin;
};

struct ValidationReport {
  int grid_n = 0;
  double min_det = 0.0;
  double max_det = 0.0;
  double aperture = 0.0;
  // worst image angle over aperture, per cone family (must stay < 1)
  double u_cone_ratio = 0.0;
  double cu_cone_ratio = 0.0;
  double s_cone_ratio = 0.0;
  double cs_cone_ratio = 0.0;
};

AnosovMap make_map(const IMat3& A, std::vector<TrigTerm> terms, double eps, double L = 0.25);
AnosovMap with_epsilon(const AnosovMap& m, double eps);
IMat3 companion_matrix();  // rows (0,0,1),(1,0,-6),(0,1,5)
AnosovMap default_map(double eps = 0.05);  // g = (0, sin 2 pi x3, 0)

Vec3 eval_lift(const AnosovMap& m, const Vec3& x);
Vec3 eval(const AnosovMap& m, const Vec3& x);
// F(y + d) - F(y) without cancellation; jac gets DF(y + d)
Vec3 eval_delta(const AnosovMap& m, const Vec3& y, const Vec3& d, Mat3* jac = nullptr);
// e with F(xb + e) - F(xb) = d; jac gets DF(xb + e)
Vec3 inverse_delta(const AnosovMap& m, const Vec3& xb, const Vec3& d, Mat3* jac = nullptr);
Mat3 jacobian(const AnosovMap& m, const Vec3& x);
void eval_with_jacobian(const AnosovMap& m, const Vec3& x, Vec3& fx, Mat3& df);

// Lift preimage: F(result) = y on R^3.
Vec3 inverse_lift(const AnosovMap& m, const Vec3& y, double tol = 1e-13);
Vec3 inverse(const AnosovMap& m, const Vec3& y, double tol = 1e-13);

ValidationReport validate(const AnosovMap& m, int grid_n = 32, double aperture = 0.5);

// Integer helpers
IMat3 imat_mul(const IMat3& a, const IMat3& b);
IMat3 imat_pow(const IMat3& a, int n);
long long imat_det(const IMat3& a);

}  // namespace an3
