#include "doctest.h"

#include <anosov3/anosov3.h>

#include <cmath>
#include <cstring>
#include <string>

#include "json.hpp"

namespace {

const char* kSmall = R"({
  "schema_version": 1,
  "map": {"matrix": [[0,0,1],[1,0,-6],[0,1,5]], "epsilon": 0.0},
  "tasks": ["zeta", "validate", "periodic"],
  "budgets": {"period_max": 3, "zeta_N": 3},
  "geometry": {"determinant_radius": 0.02}
})";

struct Report {
  an3_report* r = nullptr;
  ~Report() { an3_report_free(r); }
};

}  // namespace

TEST_CASE("map handle round trip") {
  an3_map* m = nullptr;
  REQUIRE(an3_map_create_default(0.05, &m) == AN3_OK);
  double x[3] = {0.3, 0.7, 0.1}, y[3], J[9], lam[3];
  CHECK(an3_map_eval(m, x, y) == AN3_OK);
  CHECK(an3_map_jacobian(m, x, J) == AN3_OK);
  CHECK(an3_map_lambda(m, lam) == AN3_OK);
  CHECK(lam[2] == doctest::Approx(3.2469796037174667));
  double det = J[0] * (J[4] * J[8] - J[5] * J[7]) - J[1] * (J[3] * J[8] - J[5] * J[6]) + J[2] * (J[3] * J[7] - J[4] * J[6]);
  CHECK(det == doctest::Approx(1.0));
  int64_t n = 0;
  CHECK(an3_periodic_count(m, 2, 1, &n) == AN3_OK);
  CHECK(n == 13);
  an3_map_free(m);
}

TEST_CASE("map creation errors") {
  int64_t bad[9] = {2, 0, 0, 0, 1, 0, 0, 0, 1};
  an3_map* m = nullptr;
  CHECK(an3_map_create(bad, nullptr, 0, 0.0, &m) == AN3_INVALID_ARGUMENT);
  CHECK(m == nullptr);
  CHECK(std::strlen(an3_last_error()) > 0);
  int64_t A[9] = {0, 0, 1, 1, 0, -6, 0, 1, 5};
  double term[7] = {0, 0, 1, 0, 1, 0, 0};
  CHECK(an3_map_create(A, term, 1, 0.05, &m) == AN3_OK);
  CHECK(std::strlen(an3_last_error()) == 0);
  an3_map_free(m);
  CHECK(an3_map_eval(nullptr, nullptr, nullptr) == AN3_INVALID_ARGUMENT);
  CHECK(std::string(an3_status_name(AN3_CONFIG_ERROR)) == "ConfigError");
}

TEST_CASE("small run through the C API") {
  Report a;
  REQUIRE(an3_run_json(kSmall, nullptr, 1, &a.r) == AN3_OK);
  CHECK(an3_report_exit_code(a.r) == 0);
  auto j = nlohmann::ordered_json::parse(an3_report_json(a.r));
  CHECK(j["schema_version"] == 1);
  auto it = j["tasks"].begin();
  CHECK(it.key() == "validate");
  auto counts = j["tasks"]["zeta"]["counts"];
  CHECK(counts == nlohmann::json::array({1, 13, 91}));
  for (auto& f : j["tasks"]["zeta"]["flags"]) CHECK(f["pass"] == true);
  CHECK(j["config_hash"].get<std::string>().rfind("fnv1a64:", 0) == 0);
  bool found = false;
  for (size_t i = 0; i < an3_report_table_count(a.r); ++i)
    found = found || std::string(an3_report_table_name(a.r, i)) == "periodic_counts";
  CHECK(found);
  CHECK(an3_report_table_name(a.r, 999) == nullptr);
}

TEST_CASE("identical configs give identical bytes") {
  Report a, b;
  REQUIRE(an3_run_json(kSmall, nullptr, 1, &a.r) == AN3_OK);
  REQUIRE(an3_run_json(kSmall, nullptr, 2, &b.r) == AN3_OK);
  CHECK(std::string(an3_report_json(a.r)) == std::string(an3_report_json(b.r)));
}

TEST_CASE("task filter") {
  Report a;
  REQUIRE(an3_run_json(kSmall, "validate", 1, &a.r) == AN3_OK);
  auto j = nlohmann::json::parse(an3_report_json(a.r));
  CHECK(j["tasks"].size() == 1);
  Report b;
  CHECK(an3_run_json(kSmall, "nope", 1, &b.r) == AN3_CONFIG_ERROR);
  CHECK(b.r == nullptr);
}

TEST_CASE("config errors carry the field path") {
  struct Case {
    const char* json;
    const char* path;
  } cases[] = {
      {R"({"map": {"matrix": [[0,0,1],[1,0,-6],[0,1,5]], "epsilon": 0.0}, "tasks": []})", "$.tasks"},
      {R"({"map": {"matrix": [[2,0,0],[0,1,0],[0,0,1]], "epsilon": 0.0}, "tasks": ["validate"]})", "$.map.matrix"},
      {R"({"map": {"matrix": [[0,0,1],[1,0,-6],[0,1,5]], "epsilon": -1}, "tasks": ["validate"]})", "$.map.epsilon"},
      {R"({"map": {"matrix": [[0,0,1],[1,0,-6],[0,1,5]], "epsilon": 0}, "tasks": ["validate"], "budgets": {"K": [0]}})",
       "$.budgets.K[0]"},
      {R"({"map": {"matrix": [[0,0,1],[1,0,-6],[0,1,5]], "epsilon": 0}, "tasks": ["validate"], "bogus": 1})", "$.bogus"},
      {R"({"map": {"matrix": [[0,0,1],[1,0,-6],[0,1,5]], "epsilon": 0}, "tasks": ["fly"]})", "$.tasks[0]"},
      {R"({"map": {"matrix": [[0,0,1],[1,0,-6],[0,1,5]]}, "tasks": ["validate"]})", "$.map.epsilon"},
      {R"({"map": {"matrix": [[0,0,1],[1,0,-6],[0,1,5]], "epsilon": 0}, "tasks": ["validate"], "budgets": {"quad_n": 10}})",
       "$.budgets.quad_n"},
      {"{not json", "$"},
  };
  for (const auto& c : cases) {
    an3_report* r = nullptr;
    CAPTURE(c.json);
    CHECK(an3_run_json(c.json, nullptr, 1, &r) == AN3_CONFIG_ERROR);
    CHECK(std::string(an3_last_error()).rfind(c.path, 0) == 0);
    CHECK(r == nullptr);
  }
}

TEST_CASE("task failure is isolated and gives exit code 1") {
  // periodic budget too small: periodic-dependent tasks error, validate still runs
  const char* cfg = R"({
    "map": {"matrix": [[0,0,1],[1,0,-6],[0,1,5]], "epsilon": 0.0},
    "tasks": ["validate", "periodic", "zeta"],
    "budgets": {"period_max": 3, "zeta_N": 3, "periodic_points": 20}
  })";
  Report a;
  REQUIRE(an3_run_json(cfg, nullptr, 1, &a.r) == AN3_OK);
  CHECK(an3_report_exit_code(a.r) == 1);
  auto j = nlohmann::json::parse(an3_report_json(a.r));
  CHECK(j["tasks"]["validate"]["status"] == "ok");
  CHECK(j["tasks"]["periodic"]["status"] == "error");
  CHECK(j["tasks"]["periodic"]["error"]["code"] == "BudgetExceeded");
}

TEST_CASE("flags are recomputable from the report") {
  Report a;
  REQUIRE(an3_run_json(kSmall, nullptr, 1, &a.r) == AN3_OK);
  auto j = nlohmann::json::parse(an3_report_json(a.r));
  for (auto& [name, block] : j["tasks"].items())
    for (auto& f : block["flags"]) {
      std::string op = f["comparison"];
      if (op == "is_true") {
        CHECK(f["pass"] == f["value"]);
        continue;
      }
      double v = f["value"], t = f["threshold"];
      bool p = op == "<" ? v < t : op == "<=" ? v <= t : op == ">" ? v > t : v >= t;
      CHECK(f["pass"] == p);
    }
}

TEST_CASE("write outputs") {
  Report a;
  REQUIRE(an3_run_json(kSmall, nullptr, 1, &a.r) == AN3_OK);
  CHECK(an3_report_write(a.r, "capi_test_out") == AN3_OK);
  FILE* f = std::fopen("capi_test_out/tables/zeta_taylor.csv", "r");
  CHECK(f != nullptr);
  if (f) std::fclose(f);
  CHECK(an3_report_write(a.r, "/proc/nope/x") == AN3_IO_ERROR);
}
