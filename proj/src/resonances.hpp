#pragma once

#include "margulis.hpp"
#include "thermo.hpp"

#include <Eigen/Sparse>

#include <complex>
#include <string>
#include <vector>

namespace an3 {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;

// Coefficients of a k-form on T^3. Component order: k=1 dx1,dx2,dx3; k=2 dx2^dx3,
// dx3^dx1, dx1^dx2; k=0,3 one component. Flat index = mode_index * ncomp + a.
struct FourierForm {
  int degree = 0;
  int K = 0;
  CVec coeffs;

  int ncomp() const { return (degree == 0 || degree == 3) ? 1 : 3; }
  int side() const { return 2 * K + 1; }
  long long modes() const { return (long long)side() * side() * side(); }
  long long mode_index(const std::array<int, 3>& m) const;  // -1 outside the box
  cplx coeff(const std::array<int, 3>& m, int a) const;
  // point value of component a (real part)
  double value(const Vec3& x, int a) const;
};

FourierForm zero_form(int degree, int K);
// max |c(m) - conj(c(-m))| / max |c|
double reality_defect(const FourierForm& f);

using SparseC = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

struct TransferMatrix {
  int degree = 0;
  int K = 0;
  int quad_n = 0;
  SparseC mat;
  double alias_mass = 0;  // relative coefficient mass in the outer quarter of the 1D DFTs
  bool alias_warning = false;
};

// pushforward f_* on k-forms: T[(m',a),(m,b)] = hat C_ab(A^T m' - m)
TransferMatrix assemble_transfer(const AnosovMap& m, int k, int K, int quad_n = 48, double alias_tol = 1e-10);

struct EigenOptions {
  int krylov = 0;  // 0: max(2 nev + 20, 40)
  int max_restarts = 300;
  double tol = 1e-12;  // residual relative to the leading modulus
  uint64_t seed = 12345;
  bool transpose = false;  // eigenpairs of T^T (left vectors of T)
};

struct Eigenpairs {
  std::vector<cplx> values;  // by modulus, descending
  std::vector<CVec> vectors;  // unit 2-norm
  std::vector<double> residuals;
  int restarts = 0;
  int matvecs = 0;
};

// thick-restart Arnoldi; throws EigenNoConvergence
Eigenpairs arnoldi(const SparseC& T, int nev, const EigenOptions& opt = {});

struct SpectrumResult {
  int degree = 0;
  std::vector<int> truncations;           // K values, ascending
  std::vector<std::vector<cplx>> per_K;   // leading eigenvalues for each K
  std::vector<cplx> eigenvalues;          // at the finest K
  std::vector<FourierForm> vectors;       // at the finest K
  std::vector<double> residuals;
  std::vector<double> drift;              // max step of the tracked eigenvalue between consecutive K
  std::vector<std::string> classification;  // stable / spurious / uncertain
  double gap = 0;       // |l1| - |l2|
  double pairing = 0;   // |l^T r| / (|l| |r|) for the leading eigenvalue
  double alias_mass = 0;
  bool alias_warning = false;
};

Eigenpairs leading_spectrum(const TransferMatrix& T, int nev, const EigenOptions& opt = {});
SpectrumResult spectrum_across_K(const AnosovMap& m, int k, const std::vector<int>& Ks, int nev, int quad_n = 48,
                                 double stable_drift = 1e-3, double spurious_drift = 1e-1,
                                 const EigenOptions& opt = {});

struct PullbackResult {
  FourierForm nu;           // degree 1, normalized so that the largest coefficient is real positive
  double growth = 0;        // |T^T^n eta| / (lambda_u^n |eta|)
  double rayleigh = 0;      // last one-step growth ratio
  double cauchy = 0;        // |nu_n - nu_{n-1}| on modes |m|_inf <= 2
};

// lambda_u^{-n} (f^*)^n eta, using the transpose of the k=2 pushforward
PullbackResult power_pullback(const AnosovMap& m, const TransferMatrix& T2, const FourierForm& eta, int n,
                              double underflow = 1e-8);
// seeded smooth 1-form with modes |m|_inf <= 1
FourierForm seed_one_form(int K, uint64_t seed);
FourierForm constant_one_form(int K, const Vec3& covector);

// integral of g * nu ^ theta over T^3, self-normalized by the g = 1 value
double projector_trace_measure(const FourierForm& theta, const FourierForm& nu, const Observable& g,
                               double degenerate = 1e-12);

// max relative mismatch between int nu over bins of W^u and the bin masses, after one global normalization
double restrict_to_leaf_compare(const AnosovMap& m, const FourierForm& nu, const LeafDensity& density, int nodes = 8);

}  // namespace an3
