#include "experiment.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace an3 {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kTasks = {"validate", "splitting", "periodic",    "zeta",      "pressure",  "bowen",
                                         "integrability", "entropy", "margulis", "resonances", "crosscheck"};

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  throw Error(Code::ConfigError, path + ": " + msg);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) bad(path + "." + it.key(), "unknown field");
  }
}

double as_num(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "must be finite");
  return v;
}

long long as_int(const json& j, const std::string& path) {
  if (j.is_number_integer() || j.is_number_unsigned()) return j.get<long long>();
  if (j.is_number_float()) {
    double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return (long long)v;
  }
  bad(path, "expected an integer");
}

template <class F>
void opt(const json& obj, const char* key, const std::string& path, F&& f) {
  auto it = obj.find(key);
  if (it != obj.end()) f(*it, path + "." + key);
}

void pos_int(const json& obj, const char* key, const std::string& path, int& out, int lo = 1) {
  opt(obj, key, path, [&](const json& j, const std::string& p) {
    long long v = as_int(j, p);
    if (v < lo || v > 1000000000) bad(p, "must be >= " + std::to_string(lo));
    out = (int)v;
  });
}

void pos_num(const json& obj, const char* key, const std::string& path, double& out) {
  opt(obj, key, path, [&](const json& j, const std::string& p) {
    double v = as_num(j, p);
    if (!(v > 0)) bad(p, "must be positive");
    out = v;
  });
}

std::array<int, 3> int3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) bad(path, "expected 3 integers");
  std::array<int, 3> r{};
  for (int i = 0; i < 3; ++i) {
    long long v = as_int(j[i], path + "[" + std::to_string(i) + "]");
    if (std::abs(v) > 1000) bad(path, "wavevector entries must be small integers");
    r[i] = (int)v;
  }
  return r;
}

Vec3 num3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) bad(path, "expected 3 numbers");
  return Vec3(as_num(j[0], path + "[0]"), as_num(j[1], path + "[1]"), as_num(j[2], path + "[2]"));
}

std::vector<int> int_list(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) bad(path, "expected a nonempty list of integers");
  std::vector<int> r;
  for (size_t i = 0; i < j.size(); ++i) {
    long long v = as_int(j[i], path + "[" + std::to_string(i) + "]");
    if (v < 1 || v > 100000) bad(path + "[" + std::to_string(i) + "]", "must be positive");
    r.push_back((int)v);
  }
  return r;
}

ojson vec_json(const Vec3& v) { return ojson::array({v[0], v[1], v[2]}); }
ojson int3_json(const std::array<int, 3>& k) { return ojson::array({k[0], k[1], k[2]}); }

ojson canonical(const RunConfig& c) {
  ojson j;
  j["schema_version"] = c.schema_version;
  ojson mp;
  ojson rows = ojson::array();
  for (const auto& r : c.matrix) rows.push_back(ojson::array({r[0], r[1], r[2]}));
  mp["matrix"] = rows;
  ojson terms = ojson::array();
  for (const auto& t : c.terms) {
    ojson tj;
    tj["k"] = int3_json(t.k);
    tj["amp"] = vec_json(t.amp);
    tj["phase"] = t.phase;
    terms.push_back(tj);
  }
  mp["terms"] = terms;
  mp["epsilon"] = c.epsilon;
  mp["cone_L"] = c.cone_L;
  j["map"] = mp;
  j["seed"] = c.seed;
  j["tasks"] = c.tasks;
  const Budgets& b = c.budgets;
  j["budgets"] = ojson{{"period_max", b.period_max},
                       {"periodic_points", b.periodic_points},
                       {"homotopy_steps", b.homotopy_steps},
                       {"entropy_levels", b.entropy_levels},
                       {"K", b.K},
                       {"projector_K", b.projector_K},
                       {"quad_n", b.quad_n},
                       {"eigenvalues", b.eigenvalues},
                       {"pullback_steps", b.pullback_steps},
                       {"margulis_n", b.margulis_n},
                       {"local_product_n", b.local_product_n},
                       {"zeta_N", b.zeta_N},
                       {"integrability_period_max", b.integrability_period_max},
                       {"volume_points", b.volume_points},
                       {"volume_n_min", b.volume_n_min},
                       {"volume_n_max", b.volume_n_max}};
  const Tolerances& t = c.tol;
  j["tolerances"] = ojson{{"splitting_linear", t.splitting_linear},
                          {"triple", t.triple},
                          {"eigen_real", t.eigen_real},
                          {"gap", t.gap},
                          {"drift", t.drift},
                          {"spurious_drift", t.spurious_drift},
                          {"pairing", t.pairing},
                          {"determinant", t.determinant},
                          {"integrability", t.integrability},
                          {"local_product", t.local_product},
                          {"linear_margulis", t.linear_margulis},
                          {"volume_ratio", t.volume_ratio},
                          {"seed_agreement", t.seed_agreement},
                          {"projector_bowen", t.projector_bowen}};
  const Geometry& g = c.geom;
  j["geometry"] = ojson{{"base_point", vec_json(g.base_point)},
                        {"entropy_delta", g.entropy_delta},
                        {"max_seg", g.max_seg},
                        {"density_window", g.density_window},
                        {"density_bins", g.density_bins},
                        {"holonomy_radii", g.holonomy_radii},
                        {"holonomy_bins", g.holonomy_bins},
                        {"cs_grid", g.cs_grid},
                        {"splitting_points", g.splitting_points},
                        {"determinant_radius", g.determinant_radius},
                        {"determinant_points", g.determinant_points},
                        {"omega_offset", g.omega_offset},
                        {"cone_aperture", g.cone_aperture},
                        {"validate_grid", g.validate_grid}};
  ojson obs = ojson::array();
  for (const auto& o : c.observables) {
    ojson oj;
    oj["id"] = o.id;
    oj["c0"] = o.c0;
    ojson ts = ojson::array();
    for (const auto& tt : o.terms) ts.push_back(ojson{{"k", int3_json(tt.k)}, {"amp", tt.amp}, {"phase", tt.phase}});
    oj["terms"] = ts;
    obs.push_back(oj);
  }
  j["observables"] = obs;
  return j;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Csv {
  std::string text;
  explicit Csv(const std::string& header) : text(header + "\n") {}
  template <class... T>
  void row(const T&... cols) {
    std::ostringstream os;
    bool first = true;
    auto put = [&](const auto& c) {
      if (!first) os << ',';
      first = false;
      using C = std::decay_t<decltype(c)>;
      if constexpr (std::is_floating_point_v<C>)
        os << fmt(c);
      else
        os << c;
    };
    (put(cols), ...);
    text += os.str() + "\n";
  }
};

struct Flags {
  ojson arr = ojson::array();
  void cmp(const std::string& name, double value, const char* op, double threshold) {
    bool pass = false;
    std::string o = op;
    if (o == "<") pass = value < threshold;
    else if (o == "<=") pass = value <= threshold;
    else if (o == ">") pass = value > threshold;
    else if (o == ">=") pass = value >= threshold;
    ojson f;
    f["name"] = name;
    f["value"] = value;
    f["comparison"] = o;
    f["threshold"] = threshold;
    f["pass"] = pass;
    arr.push_back(f);
  }
  void truth(const std::string& name, bool value) {
    ojson f;
    f["name"] = name;
    f["value"] = value;
    f["comparison"] = "is_true";
    f["pass"] = value;
    arr.push_back(f);
  }
};

struct TaskOut {
  ojson block;
  std::vector<std::pair<std::string, std::string>> tables;
  bool error = false;
  bool internal = false;
};

struct Ctx {
  const RunConfig& cfg;
  AnosovMap m;
  std::vector<PeriodicSet> sets;  // sets[n-1] = period n
  std::string periodic_error;
  Code periodic_code = Code::Ok;
  double ln_lu = 0;

  std::mutex mu;
  std::map<std::string, double> shared;  // estimates published for crosscheck

  explicit Ctx(const RunConfig& c) : cfg(c) {}
  void publish(const std::string& k, double v) {
    std::lock_guard<std::mutex> g(mu);
    shared[k] = v;
  }
  bool lookup(const std::string& k, double& v) {
    std::lock_guard<std::mutex> g(mu);
    auto it = shared.find(k);
    if (it == shared.end()) return false;
    v = it->second;
    return true;
  }
  const std::vector<PeriodicSet>& need_sets() const {
    if (!periodic_error.empty()) throw Error(periodic_code, "periodic data unavailable: " + periodic_error);
    return sets;
  }
};

ojson err_json(Code c, const std::string& msg) {
  ojson e;
  e["code"] = code_name(c);
  e["message"] = msg;
  return e;
}

// ---- tasks ----

void task_validate(Ctx& ctx, TaskOut& out) {
  ValidationReport v = validate(ctx.m, ctx.cfg.geom.validate_grid, ctx.cfg.geom.cone_aperture);
  ojson& b = out.block;
  b["grid_n"] = v.grid_n;
  b["min_det"] = v.min_det;
  b["max_det"] = v.max_det;
  b["aperture"] = v.aperture;
  b["u_cone_ratio"] = v.u_cone_ratio;
  b["cu_cone_ratio"] = v.cu_cone_ratio;
  b["s_cone_ratio"] = v.s_cone_ratio;
  b["cs_cone_ratio"] = v.cs_cone_ratio;
  Flags f;
  f.cmp("min_det_positive", v.min_det, ">", 0.0);
  f.cmp("u_cone_invariant", v.u_cone_ratio, "<", 1.0);
  f.cmp("cu_cone_invariant", v.cu_cone_ratio, "<", 1.0);
  f.cmp("s_cone_invariant", v.s_cone_ratio, "<", 1.0);
  f.cmp("cs_cone_invariant", v.cs_cone_ratio, "<", 1.0);
  b["flags"] = f.arr;
}

void task_splitting(Ctx& ctx, TaskOut& out) {
  const auto& m = ctx.m;
  SplitMix rng(ctx.cfg.seed ^ 0x5b1177ULL);
  Csv csv("x1,x2,x3,rate_s,rate_c,rate_u,cauchy,linear_deviation");
  double max_dev = 0, max_cauchy = 0;
  for (int i = 0; i < ctx.cfg.geom.splitting_points; ++i) {
    Vec3 x(rng.uniform(), rng.uniform(), rng.uniform());
    SplittingFrame fr = splitting_frame(m, x);
    double dev = 0;
    const Vec3* e[3] = {&fr.e_s, &fr.e_c, &fr.e_u};
    for (int k = 0; k < 3; ++k) dev = std::max(dev, std::min((*e[k] - m.lin.e[k]).norm(), (*e[k] + m.lin.e[k]).norm()));
    max_dev = std::max(max_dev, dev);
    max_cauchy = std::max(max_cauchy, fr.cauchy);
    csv.row(x[0], x[1], x[2], fr.rate_s, fr.rate_c, fr.rate_u, fr.cauchy, dev);
  }
  RateBounds rb = rate_bounds(m, 8);
  ojson& b = out.block;
  b["points"] = ctx.cfg.geom.splitting_points;
  b["max_cauchy"] = max_cauchy;
  b["max_linear_deviation"] = max_dev;
  b["rates"] = ojson{{"min_s", rb.min_s}, {"max_s", rb.max_s}, {"min_c", rb.min_c},
                     {"max_c", rb.max_c}, {"min_u", rb.min_u}, {"max_u", rb.max_u}};
  b["margins"] = ojson{{"s", rb.margin_s}, {"c", rb.margin_c}, {"cu", rb.margin_cu}};
  Flags f;
  f.truth("dominated_uniformly", rb.dominated_uniformly);
  if (m.eps == 0.0) f.cmp("frames_match_linear", max_dev, "<=", ctx.cfg.tol.splitting_linear);
  b["flags"] = f.arr;
  out.tables.push_back({"splitting_frames", csv.text});
}

void task_periodic(Ctx& ctx, TaskOut& out) {
  const auto& sets = ctx.need_sets();
  Csv csv("n,count,lefschetz,orbits,max_residual,max_seed_distance");
  bool all = true;
  ojson rows = ojson::array();
  for (const auto& s : sets) {
    long long L = lefschetz_count(ctx.m.A, s.period);
    bool ok = (long long)s.points.size() == L;
    all = all && ok;
    csv.row(s.period, (long long)s.points.size(), L, (long long)s.orbits.size(), s.max_residual, s.max_seed_distance);
    rows.push_back(ojson{{"n", s.period},
                         {"count", (long long)s.points.size()},
                         {"lefschetz", L},
                         {"orbits", (long long)s.orbits.size()},
                         {"max_residual", s.max_residual},
                         {"max_seed_distance", s.max_seed_distance}});
  }
  out.block["periods"] = rows;
  Flags f;
  f.truth("counts_match_lefschetz", all);
  out.block["flags"] = f.arr;
  out.tables.push_back({"periodic_counts", csv.text});
}

void task_zeta(Ctx& ctx, TaskOut& out) {
  const auto& sets = ctx.need_sets();
  const int N = std::min<int>(ctx.cfg.budgets.zeta_N, (int)sets.size());
  std::vector<long long> counts;
  for (int n = 1; n <= N; ++n) counts.push_back((long long)sets[n - 1].points.size());
  ZetaRational zr = zeta_exact(ctx.m);
  auto from_counts = zeta_taylor_from_counts(counts);
  auto exact = zr.taylor(N);
  Csv tcsv("order,from_counts,exact");
  bool match = from_counts.size() == exact.size();
  for (size_t i = 0; i < exact.size(); ++i) {
    long long fc = i < from_counts.size() ? from_counts[i] : 0;
    match = match && fc == exact[i];
    tcsv.row((int)i, fc, exact[i]);
  }
  ojson& b = out.block;
  b["N"] = N;
  b["counts"] = counts;
  b["taylor_exact"] = exact;
  b["numerator_poly"] = zr.numerator_poly;
  b["denominator_poly"] = zr.denominator_poly;

  // ratio D0 D2 / (D1 D3) against the rational zeta
  const double r = ctx.cfg.geom.determinant_radius;
  const int P = ctx.cfg.geom.determinant_points;
  Csv dcsv("re_z,im_z,zeta_re,zeta_im,identity_rel,literal_rel,truncation_warning");
  double worst = 0, worst_literal = 0;
  bool warn = false;
  ojson pts = ojson::array();
  for (int j = 0; j < P; ++j) {
    cplx z = std::polar(r, kTwoPi * j / P + 0.3);
    DynDet d[4];
    for (int k = 0; k < 4; ++k) d[k] = dyn_determinant(sets, k, N, z);
    bool w = d[0].truncation_warning || d[1].truncation_warning || d[2].truncation_warning || d[3].truncation_warning;
    warn = warn || w;
    cplx zeta = zr.eval(z);
    double rel = std::abs(zeta * d[1].value * d[3].value - d[0].value * d[2].value) / std::abs(d[0].value * d[2].value);
    double lit = std::abs(zeta * d[0].value * d[2].value - d[1].value * d[3].value) / std::abs(d[1].value * d[3].value);
    worst = std::max(worst, rel);
    worst_literal = std::max(worst_literal, lit);
    dcsv.row(z.real(), z.imag(), zeta.real(), zeta.imag(), rel, lit, w ? 1 : 0);
    pts.push_back(ojson{{"z", ojson::array({z.real(), z.imag()})}, {"identity_rel", rel}, {"literal_rel", lit}});
  }
  b["determinant_points"] = pts;
  b["determinant_identity_rel"] = worst;
  b["literal_form_rel"] = worst_literal;
  b["truncation_warning"] = warn;
  Flags f;
  f.truth("zeta_taylor_exact", match);
  f.cmp("determinant_identity", worst, "<", ctx.cfg.tol.determinant);
  b["flags"] = f.arr;
  out.tables.push_back({"zeta_taylor", tcsv.text});
  out.tables.push_back({"determinant_identity", dcsv.text});
}

double pressure_limit(Ctx& ctx, PressureSeries* keep = nullptr) {
  PressureSeries ps = pressure_estimate(ctx.need_sets());
  if (keep) *keep = ps;
  return ps.limit;
}

void task_pressure(Ctx& ctx, TaskOut& out) {
  PressureSeries ps;
  pressure_limit(ctx, &ps);
  Csv csv("n,p,q");
  for (size_t i = 0; i < ps.n.size(); ++i) csv.row(ps.n[i], ps.p[i], ps.q[i]);
  ojson& b = out.block;
  b["n"] = ps.n;
  b["p"] = ps.p;
  b["q"] = ps.q;
  b["limit"] = ps.limit;
  b["error"] = ps.error;
  b["exp_limit"] = std::exp(ps.limit);
  b["ln_lambda_u"] = ctx.ln_lu;
  Flags f;
  f.cmp("pressure_vs_ln_lambda_u", std::abs(ps.limit - ctx.ln_lu), "<=", ctx.cfg.tol.triple);
  b["flags"] = f.arr;
  ctx.publish("pressure", ps.limit);
  out.tables.push_back({"pressure_series", csv.text});
}

std::vector<BowenEstimate> bowen_all(Ctx& ctx) {
  const auto& sets = ctx.need_sets();
  const PeriodicSet& s = sets.back();
  const PeriodicSet* prev = sets.size() >= 2 ? &sets[sets.size() - 2] : nullptr;
  std::vector<BowenEstimate> r;
  for (const auto& g : ctx.cfg.observables) r.push_back(bowen_measure(ctx.m, s, g, prev));
  return r;
}

void task_bowen(Ctx& ctx, TaskOut& out) {
  auto est = bowen_all(ctx);
  Csv csv("observable,period,value,prev_value,raw,raw_one");
  ojson arr = ojson::array();
  for (const auto& e : est) {
    csv.row(e.observable_id, e.period, e.value, e.prev_value, e.raw, e.raw_one);
    arr.push_back(ojson{{"observable", e.observable_id},
                        {"period", e.period},
                        {"value", e.value},
                        {"prev_value", e.prev_value},
                        {"raw", e.raw},
                        {"raw_one", e.raw_one}});
  }
  out.block["estimates"] = arr;
  out.block["flags"] = ojson::array();
  out.tables.push_back({"bowen", csv.text});
}

void task_integrability(Ctx& ctx, TaskOut& out) {
  const auto& sets = ctx.need_sets();
  int nmax = std::min<int>(ctx.cfg.budgets.integrability_period_max, (int)sets.size());
  std::vector<PeriodicSet> sub(sets.begin(), sets.begin() + nmax);
  IntegrabilityResult r = integrability_test(ctx.m, sub, ctx.cfg.tol.integrability);
  ojson& b = out.block;
  b["period_max"] = nmax;
  b["verdict"] = verdict_name(r.verdict);
  b["spread"] = r.spread;
  b["tol"] = r.tol;
  Flags f;
  if (ctx.m.eps == 0.0) {
    f.truth("linear_jointly_integrable", r.verdict == Verdict::JointlyIntegrable);
    f.cmp("linear_spread_zero", r.spread, "<=", 0.0);
  } else {
    f.truth("perturbed_not_jointly_integrable", r.verdict != Verdict::JointlyIntegrable);
  }
  b["flags"] = f.arr;
}

CurveOptions curve_opts(const RunConfig& cfg) {
  CurveOptions o;
  o.max_seg = cfg.geom.max_seg;
  return o;
}

void task_entropy(Ctx& ctx, TaskOut& out) {
  const RunConfig& cfg = ctx.cfg;
  const double lu = ctx.m.lin.lam[2];
  EntropyEstimate e = entropy_estimate(ctx.m, cfg.geom.base_point, cfg.geom.entropy_delta, cfg.budgets.entropy_levels,
                                       curve_opts(cfg));
  Csv lcsv("n,length,normalized");
  for (size_t n = 0; n < e.lengths.size(); ++n) lcsv.row((int)n, e.lengths[n], e.lengths[n] * std::pow(lu, -double(n)));
  ojson& b = out.block;
  b["value"] = e.value;
  b["error"] = e.error;
  b["exp_value"] = std::exp(e.value);
  b["fit_from"] = e.fit_from;
  b["lengths"] = e.lengths;
  b["ln_lambda_u"] = ctx.ln_lu;
  ctx.publish("entropy", e.value);

  // lambda_u^{-n} length over random base points
  SplitMix rng(cfg.seed ^ 0x70107ULL);
  const int n0 = cfg.budgets.volume_n_min, n1 = cfg.budgets.volume_n_max;
  double c1 = 1e300, c2 = 0;
  Csv vcsv("point,x1,x2,x3,n,normalized_length");
  for (int i = 0; i < cfg.budgets.volume_points; ++i) {
    Vec3 x(rng.uniform(), rng.uniform(), rng.uniform());
    auto ee = entropy_estimate(ctx.m, x, cfg.geom.entropy_delta, std::max(n1, 2), curve_opts(cfg));
    for (int n = n0; n <= n1; ++n) {
      double v = ee.lengths[n] * std::pow(lu, -double(n));
      c1 = std::min(c1, v);
      c2 = std::max(c2, v);
      vcsv.row(i, x[0], x[1], x[2], n, v);
    }
  }
  b["volume"] = ojson{{"points", cfg.budgets.volume_points}, {"n_min", n0}, {"n_max", n1},
                      {"C1", c1}, {"C2", c2}, {"ratio", c2 / c1}};
  Flags f;
  f.cmp("entropy_vs_ln_lambda_u", std::abs(e.value - ctx.ln_lu), "<=", cfg.tol.triple);
  f.cmp("volume_lower_bound_positive", c1, ">", 0.0);
  f.cmp("volume_ratio", c2 / c1, "<=", cfg.tol.volume_ratio);
  b["flags"] = f.arr;
  out.tables.push_back({"entropy_lengths", lcsv.text});
  out.tables.push_back({"volume_bounds", vcsv.text});
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

void task_margulis(Ctx& ctx, TaskOut& out) {
  const RunConfig& cfg = ctx.cfg;
  const auto& m = ctx.m;
  const Vec3 x = cfg.geom.base_point;
  MargulisOptions mo;
  mo.bins = cfg.geom.density_bins;
  mo.max_seg = cfg.geom.max_seg;
  mo.grid = cfg.geom.cs_grid;
  ojson& b = out.block;
  Flags f;
  double linear_worst = 0;

  ojson dens = ojson::array();
  Csv dcsv("n,bin,edge_lo,edge_hi,mass,mass_next,density");
  for (int n : cfg.budgets.margulis_n) {
    LeafDensity d = u_density_iterate(m, x, cfg.geom.density_window, n, mo);
    double r = u_scaling_residual(d);
    linear_worst = std::max(linear_worst, r);
    dens.push_back(ojson{{"n", n}, {"u_scaling_residual", r}});
    for (size_t i = 0; i < d.mass.size(); ++i)
      dcsv.row(n, (int)i, d.edges[i], d.edges[i + 1], d.mass[i], d.mass_next[i], d.density[i]);
  }
  b["u_scaling"] = dens;

  CsPatch patch = make_cs_patch(m, x, cfg.geom.holonomy_radii.front(), cfg.geom.cs_grid);
  ojson th = ojson::array();
  for (int n : cfg.budgets.margulis_n) {
    double r = theta_scaling_residual(m, patch, n);
    linear_worst = std::max(linear_worst, r);
    th.push_back(ojson{{"n", n}, {"theta_scaling_residual", r}});
  }
  b["theta_scaling"] = th;

  MargulisOptions ho = mo;
  ho.bins = cfg.geom.holonomy_bins;
  Csv hcsv("radius,n,cs_invariance,u_invariance");
  ojson hol = ojson::array();
  const auto& radii = cfg.geom.holonomy_radii;
  std::vector<std::vector<double>> cs(radii.size()), uu(radii.size());
  for (size_t ri = 0; ri < radii.size(); ++ri) {
    Rectangle R = make_rectangle(m, x, radii[ri], radii[ri]);
    for (int n : cfg.budgets.margulis_n) {
      double a = cs_invariance_residual(m, R, n, ho).value;
      double c = u_invariance_residual(m, R, n, ho).value;
      cs[ri].push_back(a);
      uu[ri].push_back(c);
      linear_worst = std::max({linear_worst, a, c});
      hcsv.row(radii[ri], n, a, c);
      hol.push_back(ojson{{"radius", radii[ri]}, {"n", n}, {"cs_invariance", a}, {"u_invariance", c},
                          {"closure_defect", R.closure_defect}});
    }
  }
  b["holonomy"] = hol;

  Vec3 off = center_leaf_offset(m, x, cfg.geom.omega_offset);
  OmegaResult om = omega_center_density(m, x, mod1(x + off));
  b["omega"] = ojson{{"value", om.value}, {"terms", om.terms}, {"tail_bound", om.tail_bound}, {"ratio", om.ratio}};

  if (m.eps == 0.0) {
    linear_worst = std::max(linear_worst, std::abs(om.value));
    b["linear_worst_residual"] = linear_worst;
    f.cmp("linear_residuals", linear_worst, "<", cfg.tol.linear_margulis);
  } else {
    bool dn_cs = true, dn_u = true, dr_cs = true, dr_u = true;
    for (size_t ri = 0; ri < radii.size(); ++ri) {
      dn_cs = dn_cs && strictly_decreasing(cs[ri]);
      dn_u = dn_u && strictly_decreasing(uu[ri]);
    }
    for (size_t ri = 1; ri < radii.size(); ++ri)
      for (size_t k = 0; k < cs[ri].size(); ++k) {
        bool smaller = radii[ri] < radii[ri - 1];
        dr_cs = dr_cs && (smaller ? cs[ri][k] < cs[ri - 1][k] : cs[ri][k] > cs[ri - 1][k]);
        dr_u = dr_u && (smaller ? uu[ri][k] < uu[ri - 1][k] : uu[ri][k] > uu[ri - 1][k]);
      }
    f.truth("cs_invariance_decreases_with_n", dn_cs);
    f.truth("u_invariance_decreases_with_n", dn_u);
    if (radii.size() > 1) {
      f.truth("cs_invariance_decreases_with_radius", dr_cs);
      f.truth("u_invariance_decreases_with_radius", dr_u);
    }
  }

  // local product against Bowen sums
  try {
    const auto& sets = ctx.need_sets();
    std::vector<std::array<int, 3>> ks;
    for (const auto& g : cfg.observables)
      for (const auto& t : g.terms) ks.push_back(t.k);
    if (ks.empty()) ks = {{{1, 0, 0}}, {{0, 1, 0}}, {{0, 0, 1}}};
    Rectangle R = make_rectangle(m, x, radii.front(), radii.front());
    MargulisOptions lo = mo;
    lo.bins = cfg.geom.holonomy_bins;
    LocalProductResult lp = local_product_residual(m, R, cfg.budgets.local_product_n, sets.back(), ks, lo);
    b["local_product"] = ojson{{"residual", lp.residual},       {"period", sets.back().period},
                               {"n", cfg.budgets.local_product_n}, {"product", lp.product},
                               {"bowen", lp.bowen},             {"bump_radius", lp.bump_radius},
                               {"points_in_support", lp.points_in_support}};
    f.cmp("local_product", lp.residual, "<", cfg.tol.local_product);
  } catch (const Error& e) {
    b["local_product"] = ojson{{"error", err_json(e.code(), e.what())}};
    out.error = true;
  }
  b["flags"] = f.arr;
  out.tables.push_back({"leaf_density", dcsv.text});
  out.tables.push_back({"holonomy_trends", hcsv.text});
}

SpectrumResult spectrum(Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  EigenOptions eo;
  eo.seed = cfg.seed;
  return spectrum_across_K(ctx.m, 2, cfg.budgets.K, cfg.budgets.eigenvalues, cfg.budgets.quad_n, cfg.tol.drift,
                           cfg.tol.spurious_drift, eo);
}

void task_resonances(Ctx& ctx, TaskOut& out) {
  const RunConfig& cfg = ctx.cfg;
  const auto& m = ctx.m;
  SpectrumResult S = spectrum(ctx);
  ojson& b = out.block;
  Csv scsv("index,re,im,modulus,drift,classification,residual");
  ojson ev = ojson::array();
  for (size_t i = 0; i < S.eigenvalues.size(); ++i) {
    cplx v = S.eigenvalues[i];
    scsv.row((int)i, v.real(), v.imag(), std::abs(v), S.drift[i], S.classification[i], S.residuals[i]);
    ev.push_back(ojson{{"re", v.real()}, {"im", v.imag()}, {"modulus", std::abs(v)}, {"drift", S.drift[i]},
                       {"class", S.classification[i]}, {"residual", S.residuals[i]}});
  }
  Csv kcsv("K,index,re,im,modulus");
  for (size_t j = 0; j < S.truncations.size(); ++j)
    for (size_t i = 0; i < S.per_K[j].size(); ++i)
      kcsv.row(S.truncations[j], (int)i, S.per_K[j][i].real(), S.per_K[j][i].imag(), std::abs(S.per_K[j][i]));
  const cplx lead = S.eigenvalues.front();
  b["K"] = S.truncations;
  b["eigenvalues"] = ev;
  b["leading"] = ojson{{"re", lead.real()}, {"im", lead.imag()}, {"modulus", std::abs(lead)}};
  b["lambda_u"] = m.lin.lam[2];
  b["gap"] = S.gap;
  b["pairing"] = S.pairing;
  b["alias_mass"] = S.alias_mass;
  b["alias_warning"] = S.alias_warning;
  ctx.publish("spectrum", std::log(std::abs(lead)));
  Flags f;
  f.cmp("leading_real", std::abs(lead.imag()) / std::abs(lead), "<=", cfg.tol.eigen_real);
  f.cmp("leading_positive", lead.real(), ">", 0.0);
  f.cmp("leading_gap", S.gap, ">", cfg.tol.gap);
  if (S.truncations.size() > 1) f.cmp("leading_drift", S.drift.front(), "<", cfg.tol.drift);
  f.cmp("no_jordan_pairing", S.pairing, ">", cfg.tol.pairing);
  f.cmp("leading_vs_ln_lambda_u", std::abs(std::log(std::abs(lead)) - ctx.ln_lu), "<=", cfg.tol.triple);

  // k = 0 sanity: constants are preserved
  {
    TransferMatrix T0 = assemble_transfer(m, 0, cfg.budgets.projector_K, cfg.budgets.quad_n);
    EigenOptions eo;
    eo.seed = cfg.seed;
    auto e0 = leading_spectrum(T0, 1, eo);
    b["k0_leading"] = ojson{{"re", e0.values[0].real()}, {"im", e0.values[0].imag()}};
  }

  // co-resonant 1-form, projector measure
  const int pK = cfg.budgets.projector_K;
  TransferMatrix T2 = assemble_transfer(m, 2, pK, cfg.budgets.quad_n);
  EigenOptions eo;
  eo.seed = cfg.seed;
  Eigenpairs right = leading_spectrum(T2, 1, eo);
  FourierForm theta = zero_form(2, pK);
  theta.coeffs = right.vectors[0];
  PullbackResult p1 = power_pullback(m, T2, seed_one_form(pK, cfg.seed), cfg.budgets.pullback_steps);
  PullbackResult p2 = power_pullback(m, T2, seed_one_form(pK, cfg.seed + 1), cfg.budgets.pullback_steps);
  double seed_diff = (p1.nu.coeffs - p2.nu.coeffs).cwiseAbs().maxCoeff() / p1.nu.coeffs.cwiseAbs().maxCoeff();
  b["pullback"] = ojson{{"K", pK},
                        {"steps", cfg.budgets.pullback_steps},
                        {"growth", p1.growth},
                        {"rayleigh", p1.rayleigh},
                        {"cauchy", p1.cauchy},
                        {"seed_difference", seed_diff}};
  f.cmp("pullback_seed_agreement", seed_diff, "<=", cfg.tol.seed_agreement);

  Csv pcsv("observable,projector,bowen,difference");
  ojson proj = ojson::array();
  std::vector<BowenEstimate> bow;
  bool have_bowen = true;
  try {
    bow = bowen_all(ctx);
  } catch (const Error&) {
    have_bowen = false;
  }
  double worst = 0;
  for (size_t i = 0; i < cfg.observables.size(); ++i) {
    double v = projector_trace_measure(theta, p1.nu, cfg.observables[i]);
    ojson pj{{"observable", cfg.observables[i].id}, {"projector", v}};
    double bv = std::numeric_limits<double>::quiet_NaN();
    if (have_bowen) {
      bv = bow[i].value;
      pj["bowen"] = bv;
      pj["difference"] = std::abs(v - bv);
      worst = std::max(worst, std::abs(v - bv));
    }
    pcsv.row(cfg.observables[i].id, v, bv, std::abs(v - bv));
    proj.push_back(pj);
  }
  b["projector_trace_measure"] = proj;
  if (have_bowen && !cfg.observables.empty()) f.cmp("projector_vs_bowen", worst, "<=", cfg.tol.projector_bowen);

  MargulisOptions mo;
  mo.bins = cfg.geom.density_bins;
  mo.max_seg = cfg.geom.max_seg;
  LeafDensity d = u_density_iterate(m, cfg.geom.base_point, cfg.geom.density_window, cfg.budgets.local_product_n, mo);
  b["leaf_restriction_mismatch"] = restrict_to_leaf_compare(m, p1.nu, d);
  b["flags"] = f.arr;
  out.tables.push_back({"spectrum", scsv.text});
  out.tables.push_back({"spectrum_per_K", kcsv.text});
  out.tables.push_back({"projector_measure", pcsv.text});
}

void task_crosscheck(Ctx& ctx, TaskOut& out) {
  const RunConfig& cfg = ctx.cfg;
  double ent, pre, spec;
  if (!ctx.lookup("entropy", ent))
    ent = entropy_estimate(ctx.m, cfg.geom.base_point, cfg.geom.entropy_delta, cfg.budgets.entropy_levels,
                           curve_opts(cfg))
              .value;
  if (!ctx.lookup("pressure", pre)) pre = pressure_limit(ctx);
  if (!ctx.lookup("spectrum", spec)) spec = std::log(std::abs(spectrum(ctx).eigenvalues.front()));
  double lo = std::min({ent, pre, spec}), hi = std::max({ent, pre, spec});
  ojson& b = out.block;
  b["ln_lambda_u"] = ctx.ln_lu;
  b["entropy"] = ent;
  b["pressure"] = pre;
  b["spectrum"] = spec;
  b["spread"] = hi - lo;
  Flags f;
  f.cmp("mutual_spread", hi - lo, "<=", cfg.tol.triple);
  f.cmp("entropy_vs_ln_lambda_u", std::abs(ent - ctx.ln_lu), "<=", cfg.tol.triple);
  f.cmp("pressure_vs_ln_lambda_u", std::abs(pre - ctx.ln_lu), "<=", cfg.tol.triple);
  f.cmp("spectrum_vs_ln_lambda_u", std::abs(spec - ctx.ln_lu), "<=", cfg.tol.triple);
  b["flags"] = f.arr;
  Csv csv("estimate,value,deviation");
  csv.row(std::string("entropy"), ent, ent - ctx.ln_lu);
  csv.row(std::string("pressure"), pre, pre - ctx.ln_lu);
  csv.row(std::string("spectrum"), spec, spec - ctx.ln_lu);
  out.tables.push_back({"crosscheck", csv.text});
}

using TaskFn = void (*)(Ctx&, TaskOut&);

TaskFn task_fn(const std::string& name) {
  static const std::map<std::string, TaskFn> fns = {
      {"validate", task_validate}, {"splitting", task_splitting},         {"periodic", task_periodic},
      {"zeta", task_zeta},         {"pressure", task_pressure},           {"bowen", task_bowen},
      {"integrability", task_integrability}, {"entropy", task_entropy}, {"margulis", task_margulis},
      {"resonances", task_resonances},       {"crosscheck", task_crosscheck}};
  return fns.at(name);
}

void run_task(Ctx& ctx, const std::string& name, TaskOut& out) {
  out.block = ojson::object();
  out.block["status"] = "ok";
  try {
    task_fn(name)(ctx, out);
    if (out.error) out.block["status"] = "partial";
  } catch (const Error& e) {
    out.block = ojson{{"status", "error"}, {"error", err_json(e.code(), e.what())}};
    out.tables.clear();
    out.error = true;
    out.internal = e.code() == Code::Internal;
  } catch (const std::exception& e) {
    out.block = ojson{{"status", "error"}, {"error", err_json(Code::Internal, e.what())}};
    out.tables.clear();
    out.error = true;
    out.internal = true;
  }
}

}  // namespace

const std::vector<std::string>& known_tasks() { return kTasks; }

std::string fnv1a_hex(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Code::ConfigError, std::string("$: invalid JSON: ") + e.what());
  }
  RunConfig c;
  check_keys(j, "$", {"schema_version", "map", "tasks", "seed", "output_dir", "workers", "budgets", "tolerances",
                      "geometry", "observables"});
  opt(j, "schema_version", "$", [&](const json& v, const std::string& p) {
    if (as_int(v, p) != kSchemaVersion) bad(p, "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  });

  if (!j.contains("map")) bad("$.map", "required");
  const json& mp = j["map"];
  check_keys(mp, "$.map", {"matrix", "terms", "epsilon", "cone_L"});
  if (!mp.contains("matrix")) bad("$.map.matrix", "required");
  const json& A = mp["matrix"];
  if (!A.is_array() || A.size() != 3) bad("$.map.matrix", "expected 3 rows");
  for (int i = 0; i < 3; ++i) {
    std::string p = "$.map.matrix[" + std::to_string(i) + "]";
    if (!A[i].is_array() || A[i].size() != 3) bad(p, "expected 3 integers");
    for (int k = 0; k < 3; ++k) c.matrix[i][k] = as_int(A[i][k], p + "[" + std::to_string(k) + "]");
  }
  long long det = imat_det(c.matrix);
  if (std::abs(det) != 1) bad("$.map.matrix", "determinant must be +-1, got " + std::to_string(det));
  if (!mp.contains("epsilon")) bad("$.map.epsilon", "required");
  c.epsilon = as_num(mp["epsilon"], "$.map.epsilon");
  if (c.epsilon < 0) bad("$.map.epsilon", "must be >= 0");
  pos_num(mp, "cone_L", "$.map", c.cone_L);
  opt(mp, "terms", "$.map", [&](const json& ts, const std::string& p) {
    if (!ts.is_array()) bad(p, "expected a list");
    for (size_t i = 0; i < ts.size(); ++i) {
      std::string q = p + "[" + std::to_string(i) + "]";
      check_keys(ts[i], q, {"k", "amp", "phase"});
      TrigTerm t;
      if (!ts[i].contains("k") || !ts[i].contains("amp")) bad(q, "k and amp are required");
      t.k = int3(ts[i]["k"], q + ".k");
      t.amp = num3(ts[i]["amp"], q + ".amp");
      opt(ts[i], "phase", q, [&](const json& v, const std::string& pp) { t.phase = as_num(v, pp); });
      if (t.k == std::array<int, 3>{0, 0, 0}) bad(q + ".k", "must be nonzero");
      c.terms.push_back(t);
    }
  });

  if (!j.contains("tasks")) bad("$.tasks", "required");
  const json& tl = j["tasks"];
  if (!tl.is_array()) bad("$.tasks", "expected a list");
  if (tl.empty()) bad("$.tasks", "empty task list");
  std::set<std::string> seen;
  for (size_t i = 0; i < tl.size(); ++i) {
    std::string p = "$.tasks[" + std::to_string(i) + "]";
    if (!tl[i].is_string()) bad(p, "expected a task name");
    std::string t = tl[i].get<std::string>();
    if (std::find(kTasks.begin(), kTasks.end(), t) == kTasks.end()) bad(p, "unknown task '" + t + "'");
    seen.insert(t);
  }
  for (const auto& t : kTasks)
    if (seen.count(t)) c.tasks.push_back(t);

  opt(j, "seed", "$", [&](const json& v, const std::string& p) {
    long long s = as_int(v, p);
    if (s < 0) bad(p, "must be >= 0");
    c.seed = (uint64_t)s;
  });
  opt(j, "output_dir", "$", [&](const json& v, const std::string& p) {
    if (!v.is_string() || v.get<std::string>().empty()) bad(p, "expected a nonempty string");
    c.output_dir = v.get<std::string>();
  });
  pos_int(j, "workers", "$", c.workers);

  opt(j, "budgets", "$", [&](const json& b, const std::string& p) {
    check_keys(b, p, {"period_max", "periodic_points", "homotopy_steps", "entropy_levels", "K", "projector_K", "quad_n",
                      "eigenvalues", "pullback_steps", "margulis_n", "local_product_n", "zeta_N",
                      "integrability_period_max", "volume_points", "volume_n_min", "volume_n_max"});
    Budgets& B = c.budgets;
    pos_int(b, "period_max", p, B.period_max);
    opt(b, "periodic_points", p, [&](const json& v, const std::string& q) {
      long long n = as_int(v, q);
      if (n < 1) bad(q, "must be positive");
      B.periodic_points = n;
    });
    pos_int(b, "homotopy_steps", p, B.homotopy_steps);
    pos_int(b, "entropy_levels", p, B.entropy_levels, 2);
    opt(b, "K", p, [&](const json& v, const std::string& q) { B.K = int_list(v, q); });
    pos_int(b, "projector_K", p, B.projector_K);
    pos_int(b, "quad_n", p, B.quad_n);
    pos_int(b, "eigenvalues", p, B.eigenvalues);
    pos_int(b, "pullback_steps", p, B.pullback_steps);
    opt(b, "margulis_n", p, [&](const json& v, const std::string& q) { B.margulis_n = int_list(v, q); });
    pos_int(b, "local_product_n", p, B.local_product_n);
    pos_int(b, "zeta_N", p, B.zeta_N);
    pos_int(b, "integrability_period_max", p, B.integrability_period_max);
    pos_int(b, "volume_points", p, B.volume_points);
    pos_int(b, "volume_n_min", p, B.volume_n_min, 0);
    pos_int(b, "volume_n_max", p, B.volume_n_max);
  });
  {
    const Budgets& B = c.budgets;
    int kmax = std::max(*std::max_element(B.K.begin(), B.K.end()), B.projector_K);
    if (B.quad_n < 4 * kmax + 4) bad("$.budgets.quad_n", "must be >= 4K+4 = " + std::to_string(4 * kmax + 4));
    if (B.volume_n_min > B.volume_n_max) bad("$.budgets.volume_n_min", "exceeds volume_n_max");
    if (B.period_max > 16) bad("$.budgets.period_max", "at most 16");
  }

  opt(j, "tolerances", "$", [&](const json& t, const std::string& p) {
    check_keys(t, p, {"splitting_linear", "triple", "eigen_real", "gap", "drift", "spurious_drift", "pairing",
                      "determinant", "integrability", "local_product", "linear_margulis", "volume_ratio",
                      "seed_agreement", "projector_bowen"});
    Tolerances& T = c.tol;
    pos_num(t, "splitting_linear", p, T.splitting_linear);
    pos_num(t, "triple", p, T.triple);
    pos_num(t, "eigen_real", p, T.eigen_real);
    pos_num(t, "gap", p, T.gap);
    pos_num(t, "drift", p, T.drift);
    pos_num(t, "spurious_drift", p, T.spurious_drift);
    pos_num(t, "pairing", p, T.pairing);
    pos_num(t, "determinant", p, T.determinant);
    pos_num(t, "integrability", p, T.integrability);
    pos_num(t, "local_product", p, T.local_product);
    pos_num(t, "linear_margulis", p, T.linear_margulis);
    pos_num(t, "volume_ratio", p, T.volume_ratio);
    pos_num(t, "seed_agreement", p, T.seed_agreement);
    pos_num(t, "projector_bowen", p, T.projector_bowen);
  });

  opt(j, "geometry", "$", [&](const json& g, const std::string& p) {
    check_keys(g, p, {"base_point", "entropy_delta", "max_seg", "density_window", "density_bins", "holonomy_radii",
                      "holonomy_bins", "cs_grid", "splitting_points", "determinant_radius", "determinant_points",
                      "omega_offset", "cone_aperture", "validate_grid"});
    Geometry& G = c.geom;
    opt(g, "base_point", p, [&](const json& v, const std::string& q) { G.base_point = num3(v, q); });
    pos_num(g, "entropy_delta", p, G.entropy_delta);
    pos_num(g, "max_seg", p, G.max_seg);
    pos_num(g, "density_window", p, G.density_window);
    pos_int(g, "density_bins", p, G.density_bins);
    opt(g, "holonomy_radii", p, [&](const json& v, const std::string& q) {
      if (!v.is_array() || v.empty()) bad(q, "expected a nonempty list");
      G.holonomy_radii.clear();
      for (size_t i = 0; i < v.size(); ++i) {
        double r = as_num(v[i], q + "[" + std::to_string(i) + "]");
        if (!(r > 0 && r <= 0.15)) bad(q + "[" + std::to_string(i) + "]", "radius must be in (0, 0.15]");
        G.holonomy_radii.push_back(r);
      }
    });
    pos_int(g, "holonomy_bins", p, G.holonomy_bins);
    pos_int(g, "cs_grid", p, G.cs_grid, 2);
    pos_int(g, "splitting_points", p, G.splitting_points);
    pos_num(g, "determinant_radius", p, G.determinant_radius);
    pos_int(g, "determinant_points", p, G.determinant_points);
    pos_num(g, "omega_offset", p, G.omega_offset);
    pos_num(g, "cone_aperture", p, G.cone_aperture);
    if (G.cone_aperture >= 1.5) bad(p + ".cone_aperture", "must be < 1.5");
    pos_int(g, "validate_grid", p, G.validate_grid, 8);
  });

  if (j.contains("observables")) {
    const json& ol = j["observables"];
    if (!ol.is_array()) bad("$.observables", "expected a list");
    for (size_t i = 0; i < ol.size(); ++i) {
      std::string p = "$.observables[" + std::to_string(i) + "]";
      check_keys(ol[i], p, {"id", "c0", "terms"});
      Observable o;
      if (!ol[i].contains("id") || !ol[i]["id"].is_string()) bad(p + ".id", "required string");
      o.id = ol[i]["id"].get<std::string>();
      opt(ol[i], "c0", p, [&](const json& v, const std::string& q) { o.c0 = as_num(v, q); });
      opt(ol[i], "terms", p, [&](const json& ts, const std::string& q) {
        if (!ts.is_array()) bad(q, "expected a list");
        for (size_t k = 0; k < ts.size(); ++k) {
          std::string qq = q + "[" + std::to_string(k) + "]";
          check_keys(ts[k], qq, {"k", "amp", "phase"});
          TrigObs t;
          if (!ts[k].contains("k")) bad(qq + ".k", "required");
          t.k = int3(ts[k]["k"], qq + ".k");
          opt(ts[k], "amp", qq, [&](const json& v, const std::string& r) { t.amp = as_num(v, r); });
          opt(ts[k], "phase", qq, [&](const json& v, const std::string& r) { t.phase = as_num(v, r); });
          o.terms.push_back(t);
        }
      });
      c.observables.push_back(o);
    }
  } else {
    c.observables = {observable_cos("cos_x1", {1, 0, 0}), observable_cos("cos_x2", {0, 1, 0}),
                     observable_cos("cos_x3", {0, 0, 1})};
  }

  try {
    make_map(c.matrix, c.terms, c.epsilon, c.cone_L);
  } catch (const Error& e) {
    bad("$.map", e.what());
  }
  c.canonical = canonical(c).dump();
  return c;
}

void filter_tasks(RunConfig& cfg, const std::string& csv) {
  std::set<std::string> want;
  std::stringstream ss(csv);
  std::string t;
  while (std::getline(ss, t, ',')) {
    if (t.empty()) continue;
    if (std::find(kTasks.begin(), kTasks.end(), t) == kTasks.end())
      throw Error(Code::ConfigError, "--tasks: unknown task '" + t + "'");
    want.insert(t);
  }
  if (want.empty()) throw Error(Code::ConfigError, "--tasks: empty task list");
  std::vector<std::string> kept;
  for (const auto& k : kTasks)
    if (want.count(k)) kept.push_back(k);
  cfg.tasks = kept;
  ojson j = ojson::parse(cfg.canonical);
  j["tasks"] = cfg.tasks;
  cfg.canonical = j.dump();
}

RunOutput run_experiment(const RunConfig& cfg) {
  if (cfg.tasks.empty()) throw Error(Code::ConfigError, "$.tasks: empty task list");
  Ctx ctx(cfg);
  ctx.m = make_map(cfg.matrix, cfg.terms, cfg.epsilon, cfg.cone_L);
  ctx.ln_lu = std::log(ctx.m.lin.lam[2]);

  static const std::set<std::string> needs_sets = {"periodic", "zeta",     "pressure",   "bowen",
                                                   "integrability", "margulis", "resonances", "crosscheck"};
  bool want_sets = false;
  for (const auto& t : cfg.tasks) want_sets = want_sets || needs_sets.count(t) > 0;
  if (want_sets) {
    PeriodicOptions po;
    po.budget = cfg.budgets.periodic_points;
    po.homotopy_steps = cfg.budgets.homotopy_steps;
    po.workers = cfg.workers;
    try {
      for (int n = 1; n <= cfg.budgets.period_max; ++n) ctx.sets.push_back(continue_periodic_points(ctx.m, n, po));
    } catch (const Error& e) {
      ctx.periodic_error = e.what();
      ctx.periodic_code = e.code();
      ctx.sets.clear();
    }
  }

  std::vector<std::string> stage;
  for (const auto& t : cfg.tasks)
    if (t != "crosscheck") stage.push_back(t);
  std::vector<TaskOut> outs(cfg.tasks.size());
  std::map<std::string, size_t> slot;
  for (size_t i = 0; i < cfg.tasks.size(); ++i) slot[cfg.tasks[i]] = i;

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next++; i < stage.size(); i = next++) run_task(ctx, stage[i], outs[slot[stage[i]]]);
  };
  const int W = std::max(1, std::min<int>(cfg.workers, (int)stage.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < W; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (slot.count("crosscheck")) run_task(ctx, "crosscheck", outs[slot["crosscheck"]]);

  RunOutput ro;
  ojson rep;
  rep["schema_version"] = kSchemaVersion;
  rep["tool"] = "an3";
  rep["version"] = kToolVersion;
  rep["config_hash"] = "fnv1a64:" + fnv1a_hex(cfg.canonical);
  rep["config"] = ojson::parse(cfg.canonical);
  rep["lambda"] = ojson::array({ctx.m.lin.lam[0], ctx.m.lin.lam[1], ctx.m.lin.lam[2]});
  if (!ctx.periodic_error.empty()) rep["periodic_error"] = err_json(ctx.periodic_code, ctx.periodic_error);
  ojson tasks = ojson::object();
  for (size_t i = 0; i < cfg.tasks.size(); ++i) {
    TaskOut& o = outs[i];
    if (o.block.contains("flags"))
      for (const auto& f : o.block["flags"]) {
        ++ro.flags_total;
        if (!f["pass"].get<bool>()) ++ro.flags_failed;
      }
    if (o.error) ++ro.task_errors;
    ro.internal_error = ro.internal_error || o.internal;
    tasks[cfg.tasks[i]] = o.block;
    for (auto& t : o.tables) ro.tables.push_back(t);
  }
  rep["tasks"] = tasks;
  rep["summary"] = ojson{{"flags_total", ro.flags_total},
                         {"flags_failed", ro.flags_failed},
                         {"task_errors", ro.task_errors},
                         {"all_pass", ro.flags_failed == 0 && ro.task_errors == 0},
                         {"exit_code", ro.exit_code()}};
  ro.report_json = rep.dump(2) + "\n";
  return ro;
}

void write_outputs(const RunOutput& out, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "tables", ec);
  if (ec) throw Error(Code::IoError, "cannot create " + dir + ": " + ec.message());
  auto put = [&](const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(Code::IoError, "cannot write " + p.string());
    f << text;
    if (!f) throw Error(Code::IoError, "write failed for " + p.string());
  };
  put(fs::path(dir) / "report.json", out.report_json);
  for (const auto& [name, text] : out.tables) put(fs::path(dir) / "tables" / (name + ".csv"), text);
}

}  // namespace an3
