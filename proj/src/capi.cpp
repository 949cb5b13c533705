#include "anosov3/anosov3.h"

#include "experiment.hpp"

#include <exception>
#include <string>

namespace {

thread_local std::string g_last_error;

an3_status fail(an3::Code c, const std::string& msg) {
  g_last_error = msg;
  return static_cast<an3_status>(static_cast<int>(c));
}

template <class F>
an3_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return AN3_OK;
  } catch (const an3::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return fail(an3::Code::Internal, "out of memory");
  } catch (const std::exception& e) {
    return fail(an3::Code::Internal, e.what());
  } catch (...) {
    return fail(an3::Code::Internal, "unknown exception");
  }
}

}  // namespace

struct an3_map {
  an3::AnosovMap m;
};

struct an3_report {
  an3::RunOutput out;
};

extern "C" {

const char* an3_version_string(void) { return an3::kToolVersion; }

const char* an3_status_name(an3_status s) {
  if (s < AN3_OK || s > AN3_INTERNAL) return "Unknown";
  return an3::code_name(static_cast<an3::Code>(static_cast<int>(s)));
}

const char* an3_last_error(void) { return g_last_error.c_str(); }

an3_status an3_map_create(const int64_t matrix[9], const double* terms, size_t n_terms, double epsilon,
                          an3_map** out) {
  if (!matrix || !out || (n_terms && !terms)) return fail(an3::Code::InvalidArgument, "null pointer");
  *out = nullptr;
  return guarded([&] {
    an3::IMat3 A;
    for (int i = 0; i < 9; ++i) A[i / 3][i % 3] = matrix[i];
    std::vector<an3::TrigTerm> ts(n_terms);
    for (size_t i = 0; i < n_terms; ++i) {
      const double* t = terms + 7 * i;
      for (int a = 0; a < 3; ++a) {
        if (t[a] != std::floor(t[a])) throw an3::Error(an3::Code::InvalidArgument, "wavevector must be integer");
        ts[i].k[a] = (int)t[a];
      }
      ts[i].amp = an3::Vec3(t[3], t[4], t[5]);
      ts[i].phase = t[6];
    }
    *out = new an3_map{an3::make_map(A, ts, epsilon)};
  });
}

an3_status an3_map_create_default(double epsilon, an3_map** out) {
  if (!out) return fail(an3::Code::InvalidArgument, "null pointer");
  *out = nullptr;
  return guarded([&] { *out = new an3_map{an3::default_map(epsilon)}; });
}

void an3_map_free(an3_map* m) { delete m; }

an3_status an3_map_eval(const an3_map* m, const double x[3], double out[3]) {
  if (!m || !x || !out) return fail(an3::Code::InvalidArgument, "null pointer");
  return guarded([&] {
    an3::Vec3 y = an3::eval(m->m, an3::Vec3(x[0], x[1], x[2]));
    for (int i = 0; i < 3; ++i) out[i] = y[i];
  });
}

an3_status an3_map_jacobian(const an3_map* m, const double x[3], double out[9]) {
  if (!m || !x || !out) return fail(an3::Code::InvalidArgument, "null pointer");
  return guarded([&] {
    an3::Mat3 J = an3::jacobian(m->m, an3::Vec3(x[0], x[1], x[2]));
    for (int i = 0; i < 9; ++i) out[i] = J(i / 3, i % 3);
  });
}

an3_status an3_map_lambda(const an3_map* m, double out[3]) {
  if (!m || !out) return fail(an3::Code::InvalidArgument, "null pointer");
  for (int i = 0; i < 3; ++i) out[i] = m->m.lin.lam[i];
  g_last_error.clear();
  return AN3_OK;
}

an3_status an3_periodic_count(const an3_map* m, int period, int workers, int64_t* count) {
  if (!m || !count) return fail(an3::Code::InvalidArgument, "null pointer");
  if (period < 1) return fail(an3::Code::InvalidArgument, "period must be >= 1");
  return guarded([&] {
    an3::PeriodicOptions po;
    po.workers = workers > 0 ? workers : 1;
    *count = (int64_t)an3::continue_periodic_points(m->m, period, po).points.size();
  });
}

an3_status an3_run_json(const char* config_json, const char* task_filter, int workers, an3_report** out) {
  if (!config_json || !out) return fail(an3::Code::InvalidArgument, "null pointer");
  *out = nullptr;
  return guarded([&] {
    an3::RunConfig cfg = an3::parse_config(config_json);
    if (task_filter && *task_filter) an3::filter_tasks(cfg, task_filter);
    if (workers > 0) cfg.workers = workers;
    *out = new an3_report{an3::run_experiment(cfg)};
  });
}

void an3_report_free(an3_report* r) { delete r; }

int an3_report_exit_code(const an3_report* r) { return r ? r->out.exit_code() : 3; }

const char* an3_report_json(const an3_report* r) { return r ? r->out.report_json.c_str() : nullptr; }

size_t an3_report_table_count(const an3_report* r) { return r ? r->out.tables.size() : 0; }

const char* an3_report_table_name(const an3_report* r, size_t i) {
  if (!r || i >= r->out.tables.size()) return nullptr;
  return r->out.tables[i].first.c_str();
}

const char* an3_report_table_csv(const an3_report* r, size_t i) {
  if (!r || i >= r->out.tables.size()) return nullptr;
  return r->out.tables[i].second.c_str();
}

an3_status an3_report_write(const an3_report* r, const char* dir) {
  if (!r || !dir) return fail(an3::Code::InvalidArgument, "null pointer");
  return guarded([&] { an3::write_outputs(r->out, dir); });
}

}  // extern "C"
