#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace an3 {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using IMat3 = std::array<std::array<long long, 3>, 3>;

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Error codes are shared with the C API.
enum class Code : int {
  Ok = 0,
  InvalidArgument = 1,
  NoConvergence = 2,
  NotDiffeomorphism = 3,
  ConeViolation = 4,
  DegenerateFrame = 5,
  OrderViolation = 6,
  Overflow = 7,
  BudgetExceeded = 8,
  LostOrbit = 9,
  Collision = 10,
  NoIntersection = 11,
  TangentDrift = 12,
  EigenNoConvergence = 13,
  NormalizationDegenerate = 14,
  Underflow = 15,
  ConfigError = 16,
  IoError = 17,
  Internal = 18,
};

const char* code_name(Code c);

class Error : public std::runtime_error {
 public:
  Error(Code c, const std::string& msg) : std::runtime_error(msg), code_(c) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

inline double frac(double v) { return v - std::floor(v); }

inline Vec3 mod1(const Vec3& v) {
  Vec3 r(frac(v[0]), frac(v[1]), frac(v[2]));
  for (int i = 0; i < 3; ++i)
    if (r[i] >= 1.0) r[i] = 0.0;
  return r;
}

// Displacement b - a reduced to the nearest representative.
inline Vec3 torus_delta(const Vec3& a, const Vec3& b) {
  Vec3 d = b - a;
  for (int i = 0; i < 3; ++i) d[i] -= std::round(d[i]);
  return d;
}

inline double torus_dist(const Vec3& a, const Vec3& b) { return torus_delta(a, b).norm(); }

// Lift of b closest to the lifted point a.
inline Vec3 nearest_lift(const Vec3& a, const Vec3& b) { return a + torus_delta(a, b); }

inline Mat3 to_real(const IMat3& m) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = double(m[i][j]);
  return r;
}

// splitmix64, used wherever a reproducible stream is needed
struct SplitMix {
  uint64_t s;
  explicit SplitMix(uint64_t seed) : s(seed) {}
  uint64_t next() {
    uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }
};

}  // namespace an3
