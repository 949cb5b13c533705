#include "doctest.h"
#include "resonances.hpp"

using namespace an3;

TEST_CASE("fourier form indexing") {
  FourierForm f = zero_form(2, 3);
  CHECK(f.ncomp() == 3);
  CHECK(f.side() == 7);
  CHECK(f.coeffs.size() == 3 * 343);
  CHECK(f.mode_index({0, 0, 0}) >= 0);
  CHECK(f.mode_index({4, 0, 0}) == -1);
  CHECK(f.mode_index({-3, 3, -3}) >= 0);
}

TEST_CASE("transfer requires enough quadrature") {
  CHECK_THROWS_AS(assemble_transfer(default_map(0.05), 2, 8, 20), Error);
}

TEST_CASE("linear transfer on functions preserves constants") {
  TransferMatrix T = assemble_transfer(default_map(0.0), 0, 4);
  auto e = leading_spectrum(T, 1);
  CHECK(std::abs(e.values[0] - cplx(1, 0)) < 1e-12);
}

TEST_CASE("linear transfer on 2-forms: leading eigenvalues are the homology eigenvalues") {
  AnosovMap m = default_map(0.0);
  TransferMatrix T = assemble_transfer(m, 2, 4);
  auto e = leading_spectrum(T, 3);
  CHECK(std::abs(e.values[0] - m.lin.lam[2]) < 1e-10);
  CHECK(std::abs(e.values[1] - m.lin.lam[1]) < 1e-10);
  CHECK(std::abs(e.values[2] - m.lin.lam[0]) < 1e-10);
}

TEST_CASE("arnoldi against a dense solver") {
  AnosovMap m = default_map(0.05);
  TransferMatrix T = assemble_transfer(m, 2, 2, 16);
  Eigen::MatrixXcd D(T.mat);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(D);
  std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end(), [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });
  auto e = leading_spectrum(T, 4);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(std::abs(e.values[i]) - std::abs(ev[i])) < 1e-9);
  for (double r : e.residuals) CHECK(r < 1e-10);
}

TEST_CASE("perturbed leading resonance is real, simple and stable") {
  AnosovMap m = default_map(0.05);
  SpectrumResult s = spectrum_across_K(m, 2, {4, 6}, 4, 32);
  cplx l = s.eigenvalues[0];
  CHECK(std::abs(l.imag()) < 1e-8);
  CHECK(std::abs(l.real() - m.lin.lam[2]) < 1e-3);
  CHECK(s.gap > 0.2);
  CHECK(s.drift[0] < 1e-3);
  CHECK(s.pairing > 1e-2);
  CHECK(s.classification[0] == "stable");
  CHECK(reality_defect(s.vectors[0]) < 1e-8);
}

TEST_CASE("linear pullback converges to the unstable covector") {
  AnosovMap m = default_map(0.0);
  TransferMatrix T = assemble_transfer(m, 2, 3, 16);
  PullbackResult a = power_pullback(m, T, seed_one_form(3, 1), 60);
  PullbackResult b = power_pullback(m, T, seed_one_form(3, 2), 60);
  CHECK((a.nu.coeffs - b.nu.coeffs).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(a.rayleigh == doctest::Approx(m.lin.lam[2]).epsilon(1e-10));
  Vec3 v(a.nu.value(Vec3(0.2, 0.3, 0.4), 0), a.nu.value(Vec3(0.2, 0.3, 0.4), 1), a.nu.value(Vec3(0.2, 0.3, 0.4), 2));
  CHECK(std::abs(std::abs(v.normalized().dot(m.lin.dual[2].normalized())) - 1) < 1e-10);
}

TEST_CASE("pullback underflow for a form with no unstable component") {
  AnosovMap m = default_map(0.0);
  TransferMatrix T = assemble_transfer(m, 2, 3, 16);
  FourierForm eta = constant_one_form(3, m.lin.dual[1]);
  CHECK_THROWS_AS(power_pullback(m, T, eta, 40), Error);
}

TEST_CASE("projector measure in the linear case") {
  AnosovMap m = default_map(0.0);
  TransferMatrix T = assemble_transfer(m, 2, 3, 16);
  auto r = leading_spectrum(T, 1);
  FourierForm theta = zero_form(2, 3);
  theta.coeffs = r.vectors[0];
  PullbackResult p = power_pullback(m, T, seed_one_form(3, 5), 30);
  CHECK(projector_trace_measure(theta, p.nu, observable_one()) == doctest::Approx(1.0));
  CHECK(std::abs(projector_trace_measure(theta, p.nu, observable_cos("c", {1, 0, 0}))) < 1e-10);
}

TEST_CASE("projector normalization degenerate") {
  FourierForm theta = zero_form(2, 2), nu = zero_form(1, 2);
  CHECK_THROWS_AS(projector_trace_measure(theta, nu, observable_one()), Error);
}

TEST_CASE("leaf restriction in the linear case") {
  AnosovMap m = default_map(0.0);
  TransferMatrix T = assemble_transfer(m, 2, 3, 16);
  PullbackResult p = power_pullback(m, T, seed_one_form(3, 9), 30);
  MargulisOptions o;
  o.max_seg = 0.05;
  o.bins = 4;
  LeafDensity d = u_density_iterate(m, Vec3(0.3, 0.7, 0.1), 0.1, 6, o);
  CHECK(restrict_to_leaf_compare(m, p.nu, d) < 1e-8);
}
