#include "resonances.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

namespace an3 {

namespace {

using Mode = std::array<int, 3>;
using Series = std::map<Mode, cplx>;

constexpr double kDrop = 1e-17;

Mode add(const Mode& a, const Mode& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

Series mul(const Series& a, const Series& b) {
  Series r;
  for (const auto& [ka, va] : a)
    for (const auto& [kb, vb] : b) r[add(ka, kb)] += va * vb;
  for (auto it = r.begin(); it != r.end();) it = std::abs(it->second) < kDrop ? r.erase(it) : std::next(it);
  return r;
}

Series sub(const Series& a, const Series& b) {
  Series r = a;
  for (const auto& [k, v] : b) r[k] -= v;
  return r;
}

// Fourier series of exp(i z sin(2 pi k.x + phase)) from an N-point DFT in the angle
Series exp_sin_series(const Mode& k, double phase, double z, int N, double& tail, double& total) {
  Series r;
  if (z == 0.0) {
    r[{0, 0, 0}] = 1.0;
    return r;
  }
  std::vector<cplx> f(N);
  for (int j = 0; j < N; ++j) f[j] = std::exp(cplx(0, z * std::sin(kTwoPi * j / N)));
  for (int n = -N / 2 + 1; n < N / 2; ++n) {
    cplx c = 0;
    for (int j = 0; j < N; ++j) c += f[j] * std::exp(cplx(0, -kTwoPi * double(n) * j / N));
    c /= double(N);
    total += std::abs(c);
    if (std::abs(n) >= N / 2 - N / 8) tail += std::abs(c);
    if (std::abs(c) < kDrop) continue;
    r[{n * k[0], n * k[1], n * k[2]}] += c * std::exp(cplx(0, n * phase));
  }
  return r;
}

// entries of Df as series
std::array<Series, 9> jacobian_series(const AnosovMap& m) {
  std::array<Series, 9> J;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (m.A[i][j] != 0) J[3 * i + j][{0, 0, 0}] += double(m.A[i][j]);
  if (m.eps != 0.0)
    for (const auto& t : m.terms) {
      Mode kp = t.k, kn = {-t.k[0], -t.k[1], -t.k[2]};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double c = kTwoPi * m.eps * t.amp[i] * t.k[j];
          if (c == 0.0) continue;
          J[3 * i + j][kp] += 0.5 * c * std::exp(cplx(0, t.phase));
          J[3 * i + j][kn] += 0.5 * c * std::exp(cplx(0, -t.phase));
        }
    }
  return J;
}

std::vector<Series> weight_series(const AnosovMap& m, int k) {
  auto J = jacobian_series(m);
  auto at = [&](int i, int j) -> const Series& { return J[3 * i + j]; };
  std::array<Series, 9> cof;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      int i1 = (i + 1) % 3, i2 = (i + 2) % 3, j1 = (j + 1) % 3, j2 = (j + 2) % 3;
      cof[3 * i + j] = sub(mul(at(i1, j1), at(i2, j2)), mul(at(i1, j2), at(i2, j1)));
    }
  switch (k) {
    case 0: {
      Series d;
      for (int j = 0; j < 3; ++j)
        for (const auto& [q, v] : mul(at(0, j), cof[j])) d[q] += v;
      return {d};
    }
    case 1:
      return std::vector<Series>(cof.begin(), cof.end());
    case 2:
      return std::vector<Series>(J.begin(), J.end());
    default: {
      Series one;
      one[{0, 0, 0}] = 1.0;
      return {one};
    }
  }
}

CVec random_vector(long long n, SplitMix& rng) {
  CVec v(n);
  for (long long i = 0; i < n; ++i) v[i] = cplx(rng.uniform() - 0.5, rng.uniform() - 0.5);
  return v / v.norm();
}

// phase so that the largest coefficient is real positive
void fix_phase(CVec& v) {
  Eigen::Index i = 0;
  v.cwiseAbs().maxCoeff(&i);
  if (std::abs(v[i]) > 0) v *= std::conj(v[i]) / std::abs(v[i]);
}

std::vector<std::pair<double, double>> gauss_legendre(int n) {
  std::vector<std::pair<double, double>> r;
  for (int i = 1; i <= n; ++i) {
    double x = std::cos(M_PI * (i - 0.25) / (n + 0.5)), dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.push_back({x, 2 / ((1 - x * x) * dp * dp)});
  }
  return r;
}

}  // namespace

long long FourierForm::mode_index(const std::array<int, 3>& m) const {
  for (int i = 0; i < 3; ++i)
    if (m[i] < -K || m[i] > K) return -1;
  return ((long long)(m[0] + K) * side() + (m[1] + K)) * side() + (m[2] + K);
}

cplx FourierForm::coeff(const std::array<int, 3>& m, int a) const {
  long long i = mode_index(m);
  return i < 0 ? cplx(0) : coeffs[i * ncomp() + a];
}

double FourierForm::value(const Vec3& x, int a) const {
  const int S = side(), nc = ncomp();
  std::array<std::vector<cplx>, 3> e;
  for (int d = 0; d < 3; ++d) {
    e[d].resize(S);
    for (int j = 0; j < S; ++j) e[d][j] = std::exp(cplx(0, kTwoPi * (j - K) * x[d]));
  }
  cplx s = 0;
  long long idx = 0;
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j) {
      cplx eij = e[0][i] * e[1][j];
      for (int l = 0; l < S; ++l, ++idx) s += coeffs[idx * nc + a] * eij * e[2][l];
    }
  return s.real();
}

FourierForm zero_form(int degree, int K) {
  if (degree < 0 || degree > 3 || K < 0) throw Error(Code::InvalidArgument, "zero_form: degree in 0..3, K >= 0");
  FourierForm f;
  f.degree = degree;
  f.K = K;
  f.coeffs = CVec::Zero(f.modes() * f.ncomp());
  return f;
}

double reality_defect(const FourierForm& f) {
  double mx = f.coeffs.cwiseAbs().maxCoeff(), d = 0;
  if (mx == 0) return 0;
  for (int a = -f.K; a <= f.K; ++a)
    for (int b = -f.K; b <= f.K; ++b)
      for (int c = -f.K; c <= f.K; ++c)
        for (int i = 0; i < f.ncomp(); ++i)
          d = std::max(d, std::abs(f.coeff({a, b, c}, i) - std::conj(f.coeff({-a, -b, -c}, i))));
  return d / mx;
}

TransferMatrix assemble_transfer(const AnosovMap& m, int k, int K, int quad_n, double alias_tol) {
  if (k < 0 || k > 3) throw Error(Code::InvalidArgument, "assemble_transfer: degree must be 0..3");
  if (K < 1) throw Error(Code::InvalidArgument, "assemble_transfer: K must be >= 1");
  if (quad_n < 4 * K + 4) {
    std::ostringstream os;
    os << "assemble_transfer: quad_n " << quad_n << " below 4K+4 = " << 4 * K + 4;
    throw Error(Code::InvalidArgument, os.str());
  }
  TransferMatrix T;
  T.degree = k;
  T.K = K;
  T.quad_n = quad_n;
  FourierForm box = zero_form(k, K);
  const int nc = box.ncomp(), S = box.side();
  const long long dim = box.modes() * nc;
  auto W = weight_series(m, k);

  std::vector<Eigen::Triplet<cplx>> trip;
  double tail = 0, total = 0;
  for (int a0 = -K; a0 <= K; ++a0)
    for (int a1 = -K; a1 <= K; ++a1)
      for (int a2 = -K; a2 <= K; ++a2) {
        Mode mp{a0, a1, a2};
        long long row0 = box.mode_index(mp) * nc;
        Series E;
        E[{0, 0, 0}] = 1.0;
        if (m.eps != 0.0)
          for (const auto& t : m.terms) {
            double z = -kTwoPi * m.eps * (mp[0] * t.amp[0] + mp[1] * t.amp[1] + mp[2] * t.amp[2]);
            E = mul(E, exp_sin_series(t.k, t.phase, z, quad_n, tail, total));
          }
        Mode Atm{};
        for (int i = 0; i < 3; ++i)
          Atm[i] = int(m.A[0][i] * mp[0] + m.A[1][i] * mp[1] + m.A[2][i] * mp[2]);
        for (int a = 0; a < nc; ++a)
          for (int b = 0; b < nc; ++b) {
            const Series& w = W[a * nc + b];
            if (w.empty()) continue;
            for (const auto& [q, v] : mul(E, w)) {
              Mode mm{Atm[0] - q[0], Atm[1] - q[1], Atm[2] - q[2]};
              long long col = box.mode_index(mm);
              if (col < 0) continue;
              trip.emplace_back(row0 + a, col * nc + b, v);
            }
          }
      }
  (void)S;
  T.mat.resize(dim, dim);
  T.mat.setFromTriplets(trip.begin(), trip.end());
  T.mat.makeCompressed();
  T.alias_mass = total > 0 ? tail / total : 0.0;
  T.alias_warning = T.alias_mass > alias_tol;
  return T;
}

Eigenpairs arnoldi(const SparseC& T, int nev, const EigenOptions& opt) {
  const long long n = T.rows();
  if (n == 0 || nev < 1) throw Error(Code::InvalidArgument, "arnoldi: empty matrix or nev < 1");
  nev = (int)std::min<long long>(nev, n);
  int p = opt.krylov > 0 ? opt.krylov : std::max(2 * nev + 20, 40);
  p = (int)std::min<long long>(p, n);
  if (p <= nev && p < n) p = (int)std::min<long long>(nev + 1, n);

  SplitMix rng(opt.seed);
  Eigenpairs out;
  auto apply = [&](const CVec& x) -> CVec {
    ++out.matvecs;
    if (opt.transpose) return T.transpose() * x;
    return T * x;
  };
  Eigen::MatrixXcd V = Eigen::MatrixXcd::Zero(n, p + 1);
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(p + 1, p);
  V.col(0) = random_vector(n, rng);
  int kept = 0;
  double scale = 0;  // running estimate of |T|

  for (int restart = 0;; ++restart) {
    for (int j = kept; j < p; ++j) {
      CVec w = apply(V.col(j));
      double wn = w.norm();
      scale = std::max(scale, wn);
      for (int pass = 0; pass < 2; ++pass) {
        CVec h = V.leftCols(j + 1).adjoint() * w;
        w -= V.leftCols(j + 1) * h;
        H.col(j).head(j + 1) += h;
      }
      double beta = w.norm();
      if (j + 1 > n - 1 && beta < 1e-300) {
        H(j + 1, j) = 0;
        continue;
      }
      if (beta <= 1e-12 * std::max(scale, 1e-300)) {
        // invariant subspace found; continue with a fresh direction
        H(j + 1, j) = 0;
        CVec r = random_vector(n, rng);
        for (int pass = 0; pass < 2; ++pass) r -= V.leftCols(j + 1) * (V.leftCols(j + 1).adjoint() * r);
        V.col(j + 1) = r / r.norm();
      } else {
        H(j + 1, j) = beta;
        V.col(j + 1) = w / beta;
      }
    }
    Eigen::MatrixXcd Hm = H.topRows(p);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Hm);
    if (es.info() != Eigen::Success) throw Error(Code::EigenNoConvergence, "arnoldi: projected eigenproblem failed");
    std::vector<int> ord(p);
    std::iota(ord.begin(), ord.end(), 0);
    const auto& ev = es.eigenvalues();
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return std::abs(ev[a]) > std::abs(ev[b]); });
    const double lead = std::max(std::abs(ev[ord[0]]), 1e-300);
    bool done = true;
    std::vector<double> res(p);
    for (int i = 0; i < p; ++i) {
      CVec y = es.eigenvectors().col(ord[i]);
      y /= y.norm();
      res[i] = std::abs(H.row(p).dot(y.conjugate())) / lead;
      if (i < nev && !(res[i] <= opt.tol)) done = false;
    }
    if (done || p == n) {
      for (int i = 0; i < nev; ++i) {
        CVec y = es.eigenvectors().col(ord[i]);
        CVec x = V.leftCols(p) * y;
        out.values.push_back(ev[ord[i]]);
        out.vectors.push_back(x / x.norm());
        out.residuals.push_back(res[i]);
      }
      out.restarts = restart;
      return out;
    }
    if (restart >= opt.max_restarts) {
      std::ostringstream os;
      os << "arnoldi: " << opt.max_restarts << " restarts without convergence, worst wanted residual "
         << *std::max_element(res.begin(), res.begin() + nev);
      throw Error(Code::EigenNoConvergence, os.str());
    }
    // thick restart on the orthonormalized wanted Ritz vectors
    int kk = std::min(nev + (p - nev) / 2, p - 1);
    Eigen::MatrixXcd Y(p, kk);
    for (int i = 0; i < kk; ++i) Y.col(i) = es.eigenvectors().col(ord[i]);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Y);
    Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(p, kk);
    Eigen::MatrixXcd Vk = V.leftCols(p) * Q;
    Eigen::MatrixXcd Hk = Q.adjoint() * Hm * Q;
    Eigen::RowVectorXcd bk = H.row(p) * Q;
    CVec vlast = V.col(p);
    V.setZero();
    H.setZero();
    V.leftCols(kk) = Vk;
    V.col(kk) = vlast;
    H.topLeftCorner(kk, kk) = Hk;
    H.row(kk).head(kk) = bk;
    kept = kk;
  }
}

Eigenpairs leading_spectrum(const TransferMatrix& T, int nev, const EigenOptions& opt) {
  return arnoldi(T.mat, nev, opt);
}

SpectrumResult spectrum_across_K(const AnosovMap& m, int k, const std::vector<int>& Ks, int nev, int quad_n,
                                 double stable_drift, double spurious_drift, const EigenOptions& opt) {
  if (Ks.empty()) throw Error(Code::InvalidArgument, "spectrum_across_K: no truncations");
  SpectrumResult r;
  r.degree = k;
  r.truncations = Ks;
  std::sort(r.truncations.begin(), r.truncations.end());
  Eigenpairs finest;
  TransferMatrix Tf;
  for (int K : r.truncations) {
    TransferMatrix T = assemble_transfer(m, k, K, quad_n);
    r.alias_mass = std::max(r.alias_mass, T.alias_mass);
    r.alias_warning = r.alias_warning || T.alias_warning;
    Eigenpairs e = leading_spectrum(T, nev, opt);
    r.per_K.push_back(e.values);
    if (K == r.truncations.back()) {
      finest = std::move(e);
      Tf = std::move(T);
    }
  }
  r.eigenvalues = finest.values;
  r.residuals = finest.residuals;
  for (const auto& v : finest.vectors) {
    FourierForm f = zero_form(k, Tf.K);
    f.coeffs = v;
    fix_phase(f.coeffs);
    r.vectors.push_back(std::move(f));
  }
  const size_t L = r.truncations.size();
  for (cplx mu : r.eigenvalues) {
    double drift = 0;
    cplx cur = mu;
    for (size_t j = L - 1; j-- > 0;) {
      const auto& prev = r.per_K[j];
      cplx best = prev.empty() ? cplx(1e300) : prev[0];
      for (cplx v : prev)
        if (std::abs(v - cur) < std::abs(best - cur)) best = v;
      drift = std::max(drift, std::abs(best - cur));
      cur = best;
    }
    if (L < 2) drift = std::numeric_limits<double>::quiet_NaN();
    r.drift.push_back(drift);
    r.classification.push_back(drift < stable_drift ? "stable" : drift > spurious_drift ? "spurious" : "uncertain");
  }
  if (r.eigenvalues.size() >= 2) r.gap = std::abs(r.eigenvalues[0]) - std::abs(r.eigenvalues[1]);
  // no-Jordan witness from the left eigenvector
  EigenOptions lo = opt;
  lo.transpose = true;
  Eigenpairs left = arnoldi(Tf.mat, std::min(nev, 4), lo);
  size_t best = 0;
  for (size_t i = 0; i < left.values.size(); ++i)
    if (std::abs(left.values[i] - r.eigenvalues[0]) < std::abs(left.values[best] - r.eigenvalues[0])) best = i;
  const CVec& l = left.vectors[best];
  const CVec& rv = finest.vectors[0];
  r.pairing = std::abs((l.array() * rv.array()).sum()) / (l.norm() * rv.norm());
  return r;
}

FourierForm seed_one_form(int K, uint64_t seed) {
  FourierForm f = zero_form(1, K);
  SplitMix rng(seed);
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int c = -1; c <= 1; ++c) {
        Mode mm{a, b, c}, mn{-a, -b, -c};
        if (f.mode_index(mm) > f.mode_index(mn)) continue;
        for (int i = 0; i < 3; ++i) {
          cplx v(rng.uniform() - 0.5, rng.uniform() - 0.5);
          if (mm == mn) v = v.real();
          f.coeffs[f.mode_index(mm) * 3 + i] = v;
          f.coeffs[f.mode_index(mn) * 3 + i] = std::conj(v);
        }
      }
  return f;
}

FourierForm constant_one_form(int K, const Vec3& covector) {
  FourierForm f = zero_form(1, K);
  long long z = f.mode_index({0, 0, 0});
  for (int i = 0; i < 3; ++i) f.coeffs[z * 3 + i] = covector[i];
  return f;
}

namespace {

// nu-hat_a(m) <-> left-vector entry (-m, a)
CVec flip_modes(const FourierForm& f) {
  CVec r(f.coeffs.size());
  const int nc = f.ncomp();
  for (int a = -f.K; a <= f.K; ++a)
    for (int b = -f.K; b <= f.K; ++b)
      for (int c = -f.K; c <= f.K; ++c) {
        long long i = f.mode_index({a, b, c}), j = f.mode_index({-a, -b, -c});
        for (int q = 0; q < nc; ++q) r[j * nc + q] = f.coeffs[i * nc + q];
      }
  return r;
}

double low_mode_distance(const FourierForm& a, const CVec& b) {
  double d = 0;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j)
      for (int k = -2; k <= 2; ++k) {
        long long idx = a.mode_index({i, j, k});
        if (idx < 0) continue;
        for (int q = 0; q < 3; ++q) d = std::max(d, std::abs(a.coeffs[idx * 3 + q] - b[idx * 3 + q]));
      }
  return d;
}

}  // namespace

PullbackResult power_pullback(const AnosovMap& m, const TransferMatrix& T2, const FourierForm& eta, int n,
                              double underflow) {
  if (T2.degree != 2) throw Error(Code::InvalidArgument, "power_pullback: needs the k=2 transfer matrix");
  if (eta.degree != 1 || eta.K != T2.K) throw Error(Code::InvalidArgument, "power_pullback: eta must be a 1-form with the matrix's K");
  if (n < 1) throw Error(Code::InvalidArgument, "power_pullback: n >= 1");
  const double lu = m.lin.lam[2];
  CVec l = flip_modes(eta);
  const double n0 = l.norm();
  if (!(n0 > 0)) throw Error(Code::InvalidArgument, "power_pullback: eta is zero");
  PullbackResult r;
  double logg = 0;
  CVec prev_nu;
  FourierForm cur = zero_form(1, T2.K);
  for (int it = 1; it <= n; ++it) {
    CVec next = T2.mat.transpose() * l;
    double ratio = next.norm() / l.norm();
    r.rayleigh = ratio;
    logg += std::log(ratio / lu);
    l = next / next.norm();
    if (it >= n - 1) {
      cur.coeffs = flip_modes(FourierForm{1, T2.K, l});
      fix_phase(cur.coeffs);
      if (it == n - 1) prev_nu = cur.coeffs;
    }
  }
  r.growth = std::exp(logg);
  if (!(r.growth > underflow)) {
    std::ostringstream os;
    os << "power_pullback: growth " << r.growth << " below " << underflow << ", seed has no component on the leading state";
    throw Error(Code::Underflow, os.str());
  }
  r.nu = cur;
  r.cauchy = n >= 2 ? low_mode_distance(cur, prev_nu) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

double projector_trace_measure(const FourierForm& theta, const FourierForm& nu, const Observable& g, double degenerate) {
  if (theta.degree != 2 || nu.degree != 1) throw Error(Code::InvalidArgument, "projector_trace_measure: need a 2-form and a 1-form");
  // hat S(p) = sum_a sum_m nu_a(m) theta_a(p - m)
  auto S = [&](const Mode& p) {
    cplx s = 0;
    for (int a = -nu.K; a <= nu.K; ++a)
      for (int b = -nu.K; b <= nu.K; ++b)
        for (int c = -nu.K; c <= nu.K; ++c) {
          Mode q{p[0] - a, p[1] - b, p[2] - c};
          long long j = theta.mode_index(q);
          if (j < 0) continue;
          long long i = nu.mode_index({a, b, c});
          for (int r = 0; r < 3; ++r) s += nu.coeffs[i * 3 + r] * theta.coeffs[j * 3 + r];
        }
    return s;
  };
  cplx s0 = S({0, 0, 0});
  if (!(std::abs(s0) > degenerate * nu.coeffs.norm() * theta.coeffs.norm()))
    throw Error(Code::NormalizationDegenerate, "projector_trace_measure: g=1 pairing vanishes");
  cplx v = g.c0 * s0;
  for (const auto& t : g.terms) {
    Mode kp = t.k, kn{-t.k[0], -t.k[1], -t.k[2]};
    v += 0.5 * t.amp * (std::exp(cplx(0, t.phase)) * S(kn) + std::exp(cplx(0, -t.phase)) * S(kp));
  }
  return (v / s0).real();
}

double restrict_to_leaf_compare(const AnosovMap& m, const FourierForm& nu, const LeafDensity& d, int nodes) {
  if (nu.degree != 1) throw Error(Code::InvalidArgument, "restrict_to_leaf_compare: nu must be a 1-form");
  if (d.mass.empty()) throw Error(Code::InvalidArgument, "restrict_to_leaf_compare: empty density");
  UChart c = make_uchart(m, d.base, d.depth);
  auto gl = gauss_legendre(nodes);
  std::vector<double> I;
  for (size_t i = 0; i + 1 < d.params.size(); ++i) {
    double a = d.params[i], b = d.params[i + 1], s = 0;
    for (auto [x, w] : gl) {
      Vec3 p, dp;
      uchart_point_tangent(m, c, 0.5 * (a + b) + 0.5 * (b - a) * x, p, dp);
      Vec3 pt = mod1(p);
      s += w * 0.5 * (b - a) * (nu.value(pt, 0) * dp[0] + nu.value(pt, 1) * dp[1] + nu.value(pt, 2) * dp[2]);
    }
    I.push_back(s);
  }
  double si = std::accumulate(I.begin(), I.end(), 0.0), sm = std::accumulate(d.mass.begin(), d.mass.end(), 0.0);
  if (!(std::abs(si) > 0) || !(sm > 0))
    throw Error(Code::NormalizationDegenerate, "restrict_to_leaf_compare: vanishing total");
  double r = 0;
  for (size_t i = 0; i < I.size(); ++i) r = std::max(r, std::abs((I[i] / si) / (d.mass[i] / sm) - 1.0));
  return r;
}

}  // namespace an3
