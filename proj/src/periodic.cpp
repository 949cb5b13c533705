#include "periodic.hpp"

#include <algorithm>
#include <complex>
#include <numeric>
#include <sstream>
#include <limits>
#include <thread>

namespace an3 {

using i128 = __int128;
using IM = std::array<std::array<i128, 3>, 3>;

namespace {

i128 iabs(i128 v) { return v < 0 ? -v : v; }

IM identity() {
  IM r{};
  for (int i = 0; i < 3; ++i) r[i][i] = 1;
  return r;
}

}  // namespace

Smith smith_normal_form(const IMat3& M) {
  IM S{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) S[i][j] = M[i][j];
  IM U = identity(), V = identity(), Vi = identity();

  auto row_swap = [&](int a, int b) {
    if (a == b) return;
    std::swap(S[a], S[b]);
    std::swap(U[a], U[b]);
  };
  auto col_swap = [&](int a, int b) {
    if (a == b) return;
    for (int i = 0; i < 3; ++i) {
      std::swap(S[i][a], S[i][b]);
      std::swap(V[i][a], V[i][b]);
    }
    std::swap(Vi[a], Vi[b]);
  };
  auto row_axpy = [&](int dst, int src, i128 q) {  // row dst -= q row src
    for (int j = 0; j < 3; ++j) {
      S[dst][j] -= q * S[src][j];
      U[dst][j] -= q * U[src][j];
    }
  };
  auto col_axpy = [&](int dst, int src, i128 q) {  // col dst -= q col src
    for (int i = 0; i < 3; ++i) {
      S[i][dst] -= q * S[i][src];
      V[i][dst] -= q * V[i][src];
    }
    for (int j = 0; j < 3; ++j) Vi[src][j] += q * Vi[dst][j];
  };

  for (int t = 0; t < 3; ++t) {
    for (int guard = 0; guard < 10000; ++guard) {
      int pi = -1, pj = -1;
      i128 best = 0;
      for (int i = t; i < 3; ++i)
        for (int j = t; j < 3; ++j)
          if (S[i][j] != 0 && (pi < 0 || iabs(S[i][j]) < best)) {
            best = iabs(S[i][j]);
            pi = i;
            pj = j;
          }
      if (pi < 0) throw Error(Code::InvalidArgument, "smith_normal_form: singular matrix");
      row_swap(t, pi);
      col_swap(t, pj);
      bool dirty = false;
      for (int i = t + 1; i < 3; ++i) {
        row_axpy(i, t, S[i][t] / S[t][t]);
        if (S[i][t] != 0) dirty = true;
      }
      for (int j = t + 1; j < 3; ++j) {
        col_axpy(j, t, S[t][j] / S[t][t]);
        if (S[t][j] != 0) dirty = true;
      }
      if (dirty) continue;
      bool divides = true;
      for (int i = t + 1; i < 3 && divides; ++i)
        for (int j = t + 1; j < 3; ++j)
          if (S[i][j] % S[t][t] != 0) {
            row_axpy(t, i, -1);  // row t += row i
            divides = false;
            break;
          }
      if (divides) break;
    }
    if (S[t][t] < 0) {
      for (int j = 0; j < 3; ++j) {
        S[t][j] = -S[t][j];
        U[t][j] = -U[t][j];
      }
    }
  }
  Smith r;
  for (int i = 0; i < 3; ++i) r.d[i] = S[i][i];
  r.U = U;
  r.V = V;
  r.Vinv = Vi;
  return r;
}

long long lefschetz_count(const IMat3& A, int n) {
  if (n < 1) throw Error(Code::InvalidArgument, "lefschetz_count: n must be >= 1");
  IMat3 P = imat_pow(A, n);
  for (int i = 0; i < 3; ++i) P[i][i] -= 1;
  long long d = imat_det(P);
  if (d == 0) throw Error(Code::InvalidArgument, "lefschetz_count: A^n - I is singular");
  return d < 0 ? -d : d;
}

namespace {

// Exact model of the linear period-n points: x = p / D mod 1 with p in Z^3.
struct Lattice {
  Smith snf;
  i128 D = 1;  // largest invariant factor
  long long count = 0;

  long long index_of(const std::array<i128, 3>& p) const {
    std::array<i128, 3> y{};
    for (int i = 0; i < 3; ++i) {
      i128 s = 0;
      for (int j = 0; j < 3; ++j) s += snf.Vinv[i][j] * p[j];
      y[i] = s;
    }
    i128 idx = 0;
    for (int i = 0; i < 3; ++i) {
      i128 di = snf.d[i];
      i128 ji = y[i] / (D / di);
      ji %= di;
      if (ji < 0) ji += di;
      idx = idx * di + ji;
    }
    return (long long)idx;
  }

  std::array<i128, 3> point_of(long long idx) const {
    std::array<i128, 3> j{};
    for (int i = 2; i >= 0; --i) {
      j[i] = idx % (long long)snf.d[i];
      idx /= (long long)snf.d[i];
    }
    std::array<i128, 3> p{};
    for (int i = 0; i < 3; ++i) {
      i128 s = 0;
      for (int k = 0; k < 3; ++k) s += snf.V[i][k] * (j[k] * (D / snf.d[k]));
      s %= D;
      if (s < 0) s += D;
      p[i] = s;
    }
    return p;
  }
};

Lattice make_lattice(const IMat3& A, int n, long long budget) {
  long long cnt = lefschetz_count(A, n);
  if (cnt > budget) {
    std::ostringstream os;
    os << "period " << n << " has " << cnt << " points, over the enumeration budget " << budget;
    throw Error(Code::BudgetExceeded, os.str());
  }
  IMat3 P = imat_pow(A, n);
  for (int i = 0; i < 3; ++i) P[i][i] -= 1;
  Lattice L;
  L.snf = smith_normal_form(P);
  L.D = L.snf.d[2];
  L.count = cnt;
  if ((long long)(L.snf.d[0] * L.snf.d[1] * L.snf.d[2]) != cnt)
    throw Error(Code::Internal, "Smith form does not reproduce the Lefschetz count");
  return L;
}

std::array<i128, 3> apply_mod(const IMat3& A, const std::array<i128, 3>& p, i128 D) {
  std::array<i128, 3> r{};
  for (int i = 0; i < 3; ++i) {
    i128 s = 0;
    for (int j = 0; j < 3; ++j) s += (i128)A[i][j] * p[j];
    s %= D;
    if (s < 0) s += D;
    r[i] = s;
  }
  return r;
}

Vec3 to_point(const std::array<i128, 3>& p, i128 D) {
  return Vec3(double(p[0]) / double(D), double(p[1]) / double(D), double(p[2]) / double(D));
}

// F^n on the lift with its derivative
void iterate_n(const AnosovMap& m, const Vec3& x, int n, Vec3& fx, Mat3& J) {
  fx = x;
  J.setIdentity();
  for (int k = 0; k < n; ++k) {
    Vec3 y;
    Mat3 d;
    eval_with_jacobian(m, fx, y, d);
    fx = y;
    J = d * J;
  }
}

std::array<double, 3> sorted_multipliers(const Mat3& J) {
  Eigen::EigenSolver<Mat3> es(J, false);
  auto ev = es.eigenvalues();
  std::array<std::complex<double>, 3> v{ev[0], ev[1], ev[2]};
  std::sort(v.begin(), v.end(), [](auto a, auto b) { return std::abs(a) < std::abs(b); });
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i) r[i] = std::abs(v[i].imag()) < 1e-9 * std::abs(v[i]) ? v[i].real() : std::abs(v[i]);
  return r;
}

// Newton on G(x) = F^n(x) - x - k at fixed map; returns residual, ok set on convergence.
double newton_closed(const AnosovMap& m, int n, const Vec3& k, Vec3& x, double tol, int max_it, Mat3* Jout,
                     bool* ok) {
  double res = 1e300;
  *ok = false;
  for (int it = 0; it < max_it; ++it) {
    Vec3 fx;
    Mat3 J;
    iterate_n(m, x, n, fx, J);
    Vec3 G = fx - x - k;
    res = G.lpNorm<Eigen::Infinity>();
    if (Jout) *Jout = J;
    Mat3 M = J - Mat3::Identity();
    Vec3 dx = M.partialPivLu().solve(G);
    // G carries rounding of order |F^n x| * 1e-16, so position accuracy |dx| also counts
    const double step = dx.lpNorm<Eigen::Infinity>();
    if (step <= tol) res = std::min(res, step);
    // the floor set by rounding in F^n x itself
    const double floor = 8 * std::numeric_limits<double>::epsilon() * fx.lpNorm<Eigen::Infinity>();
    if (res <= std::max(tol, floor)) {
      *ok = true;
      if (dx.lpNorm<Eigen::Infinity>() < 1e-3) x -= dx;  // final polish
      return res;
    }
    if (!dx.allFinite()) return 1e300;
    double st = dx.lpNorm<Eigen::Infinity>();
    if (st > 0.02) dx *= 0.02 / st;
    x -= dx;
  }
  return res;
}

struct OrbitWork {
  long long rep;
  std::vector<long long> indices;  // lattice indices along the orbit
};

}  // namespace

namespace {

PeriodicSet build_set(const AnosovMap& m, int n, const PeriodicOptions& opt, bool linear_only) {
  Lattice lat = make_lattice(m.A, n, opt.budget);
  const long long N = lat.count;
  PeriodicSet set;
  set.period = n;
  set.expected_count = N;
  set.points.resize(N);
  set.orbit_of.assign(N, 0);

  // exact orbit decomposition in the linear model
  std::vector<char> seen(N, 0);
  std::vector<OrbitWork> orbits;
  for (long long i = 0; i < N; ++i) {
    if (seen[i]) continue;
    OrbitWork w;
    w.rep = i;
    auto p = lat.point_of(i);
    long long idx = i;
    do {
      seen[idx] = 1;
      w.indices.push_back(idx);
      p = apply_mod(m.A, p, lat.D);
      idx = lat.index_of(p);
    } while (idx != i && (long long)w.indices.size() <= n);
    if (idx != i || n % (int)w.indices.size() != 0)
      throw Error(Code::Internal, "linear orbit does not close");
    orbits.push_back(std::move(w));
  }
  seen.clear();
  seen.shrink_to_fit();
  set.orbits.resize(orbits.size());

  IMat3 An = imat_pow(m.A, n);
  const bool linear = linear_only || m.eps == 0.0;
  const double lnc = std::log(m.lin.lam[1]);

  auto work = [&](size_t begin, size_t end, double& max_seed, double& max_res, std::string& err) {
    for (size_t o = begin; o < end && err.empty(); ++o) {
      const OrbitWork& w = orbits[o];
      auto p = lat.point_of(w.rep);
      Vec3 seed = to_point(p, lat.D);
      PeriodicOrbit& orb = set.orbits[o];
      orb.first = (uint32_t)w.rep;
      orb.length = (uint32_t)w.indices.size();
      double jc;
      if (linear) {
        for (int i = 0; i < 3; ++i) orb.mult[i] = std::pow(m.lin.lam[i], n);
        jc = -(n * lnc);
        for (size_t t = 0; t < w.indices.size(); ++t) {
          auto q = lat.point_of(w.indices[t]);
          PeriodicPoint& pp = set.points[w.indices[t]];
          pp.point = to_point(q, lat.D);
          pp.period = n;
          pp.jc_sum = jc;
          set.orbit_of[w.indices[t]] = (uint32_t)o;
        }
        continue;
      }
      // integer translation class of the seed: A^n p - p = D k
      std::array<i128, 3> pn{};
      for (int i = 0; i < 3; ++i) {
        i128 s = 0;
        for (int j = 0; j < 3; ++j) s += (i128)An[i][j] * p[j];
        pn[i] = s;
      }
      Vec3 kvec;
      for (int i = 0; i < 3; ++i) kvec[i] = double((pn[i] - p[i]) / lat.D);
      Vec3 x = seed;
      double done = 0.0, stepsz = 1.0 / opt.homotopy_steps;
      Mat3 J;
      double res = 0;
      // secant predictor from the last two accepted parameters
      Vec3 xprev = x;
      double dprev = -1.0;
      while (done < 1.0 - 1e-15) {
        double target = std::min(1.0, done + stepsz);
        AnosovMap mi = with_epsilon(m, m.eps * target);
        Vec3 xt = x;
        if (dprev >= 0) xt += (x - xprev) * ((target - done) / (done - dprev));
        bool ok = false;
        res = newton_closed(mi, n, kvec, xt, opt.tol, 40, &J, &ok);
        if (ok) {
          xprev = x;
          dprev = done;
          x = xt;
          done = target;
          stepsz = std::min(stepsz * 1.5, 1.0 / opt.homotopy_steps);
        } else {
          stepsz *= 0.5;
          if (stepsz < 1.0 / (opt.homotopy_steps * 1024.0)) {
            std::ostringstream os;
            os << "continuation lost orbit with seed (" << seed[0] << "," << seed[1] << "," << seed[2]
               << ") at eps " << m.eps * target << ", residual " << res;
            err = os.str();
            break;
          }
        }
      }
      if (!err.empty()) break;
      Vec3 fx;
      iterate_n(m, x, n, fx, J);
      orb.mult = sorted_multipliers(J);
      jc = -std::log(std::abs(orb.mult[1]));
      x = mod1(x);
      max_seed = std::max(max_seed, torus_dist(x, seed));
      for (size_t t = 0; t < w.indices.size(); ++t) {
        if (t > 0) {
          x = eval(m, x);
          if (t > 3) {
            // restore accuracy lost to forward expansion
            auto q = lat.point_of(w.indices[t]);
            Vec3 s = to_point(q, lat.D);
            Vec3 xl = nearest_lift(s, x);
            std::array<i128, 3> qn{};
            for (int i = 0; i < 3; ++i) {
              i128 sum = 0;
              for (int j = 0; j < 3; ++j) sum += (i128)An[i][j] * q[j];
              qn[i] = sum;
            }
            Vec3 kq;
            for (int i = 0; i < 3; ++i) kq[i] = double((qn[i] - q[i]) / lat.D);
            Vec3 fx2;
            Mat3 J2;
            iterate_n(m, xl, n, fx2, J2);
            Vec3 G = fx2 - xl - kq;
            Vec3 dx = (J2 - Mat3::Identity()).partialPivLu().solve(G);
            if (dx.lpNorm<Eigen::Infinity>() < 1e-6) xl -= dx;
            x = mod1(xl);
          }
        }
        PeriodicPoint& pp = set.points[w.indices[t]];
        pp.point = x;
        pp.period = n;
        pp.jc_sum = jc;
        set.orbit_of[w.indices[t]] = (uint32_t)o;
      }
      // closure residual at the representative
      Vec3 y = set.points[w.rep].point;
      for (int k = 0; k < n; ++k) y = eval(m, y);
      max_res = std::max(max_res, torus_dist(y, set.points[w.rep].point));
    }
  };

  int nw = std::max(1, opt.workers);
  std::vector<double> ms(nw, 0.0), mr(nw, 0.0);
  std::vector<std::string> errs(nw);
  size_t no = orbits.size();
  if (nw == 1) {
    work(0, no, ms[0], mr[0], errs[0]);
  } else {
    std::vector<std::thread> th;
    for (int t = 0; t < nw; ++t) {
      size_t b = no * t / nw, e = no * (t + 1) / nw;
      th.emplace_back([&, t, b, e] { work(b, e, ms[t], mr[t], errs[t]); });
    }
    for (auto& t : th) t.join();
  }
  for (int t = 0; t < nw; ++t)
    if (!errs[t].empty()) throw Error(Code::LostOrbit, errs[t]);
  set.max_seed_distance = *std::max_element(ms.begin(), ms.end());
  set.max_residual = *std::max_element(mr.begin(), mr.end());

  // exact lattice points are distinct by construction
  if (opt.check_collisions && !linear && N > 1) {
    std::vector<uint32_t> ord(N);
    std::iota(ord.begin(), ord.end(), 0u);
    std::sort(ord.begin(), ord.end(), [&](uint32_t a, uint32_t b) {
      const Vec3& pa = set.points[a].point;
      const Vec3& pb = set.points[b].point;
      if (pa[0] != pb[0]) return pa[0] < pb[0];
      if (pa[1] != pb[1]) return pa[1] < pb[1];
      return pa[2] < pb[2];
    });
    const double h = opt.separation;
    auto close = [&](uint32_t a, uint32_t b) {
      return torus_dist(set.points[a].point, set.points[b].point) < h;
    };
    for (long long i = 0; i < N; ++i) {
      for (long long j = i + 1; j < N; ++j) {
        double dx = set.points[ord[j]].point[0] - set.points[ord[i]].point[0];
        if (dx >= h) break;
        if (close(ord[i], ord[j])) {
          std::ostringstream os;
          os << "two continued points within " << h << " (lattice indices " << ord[i] << ", " << ord[j] << ")";
          throw Error(Code::Collision, os.str());
        }
      }
    }
    // wrap-around in the first coordinate
    for (long long i = 0; i < N && set.points[ord[i]].point[0] < h; ++i)
      for (long long j = N - 1; j > i && set.points[ord[j]].point[0] > 1.0 - h; --j)
        if (close(ord[i], ord[j])) throw Error(Code::Collision, "two continued points collide across the boundary");
  }
  return set;
}

}  // namespace

PeriodicSet linear_periodic_points(const AnosovMap& m, int n, const PeriodicOptions& opt) {
  return build_set(m, n, opt, true);
}

PeriodicSet continue_periodic_points(const AnosovMap& m, int n, const PeriodicOptions& opt) {
  return build_set(m, n, opt, false);
}

}  // namespace an3
